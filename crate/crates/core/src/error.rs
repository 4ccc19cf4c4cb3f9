use std::path::PathBuf;

use crate::network::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// No noise and no interferers: the SINR denominator is zero.
    #[error("SINR undefined: zero noise power and no interferers")]
    UndefinedDenominator,

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("unknown flow {0}")]
    UnknownFlow(usize),

    #[error("missing position for node {0}")]
    MissingPosition(NodeId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
