use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, in meters.
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    /// Like [`Position::new`] but rejects NaN and infinite coordinates.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        let p = Position { x, y };
        if p.is_finite() {
            Ok(p)
        } else {
            Err(Error::validation(
                "position",
                format!("non-finite coordinate ({x}, {y})"),
            ))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Position {
        Position::new(self.x + dx, self.y + dy)
    }

    /// Point at fraction `t` of the segment from `self` to `other`.
    pub fn lerp(&self, other: &Position, t: f64) -> Position {
        Position::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(self, other)
    }
}

impl From<[f64; 2]> for Position {
    fn from([x, y]: [f64; 2]) -> Self {
        Position { x, y }
    }
}

impl From<Position> for [f64; 2] {
    fn from(p: Position) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance.
pub fn distance(p: &Position, q: &Position) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

/// Axis-aligned rectangle, used to bound endpoint random walks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Position,
    pub max: Position,
}

impl Bounds {
    /// Smallest rectangle containing every point, grown by `margin` on each side.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Position>, margin: f64) -> Option<Bounds> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Some(Bounds {
            min: min.offset(-margin, -margin),
            max: max.offset(margin, margin),
        })
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    pub fn contains(&self, p: &Position) -> bool {
        (self.min.x..=self.max.x).contains(&p.x) && (self.min.y..=self.max.y).contains(&p.y)
    }
}
