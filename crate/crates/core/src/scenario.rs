//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! format_version = 1
//! name = "two_flow_table3_noise1"
//! seed = 1
//!
//! [channel]            # every field optional
//! eta = 2.0
//! p_t = 1.0
//! p_m = 1.0
//! p_n = 1.0
//! fading_sigma = 0.0
//! min_distance = 0.1
//!
//! [[flows]]
//! tx = { pos = [-10.0, 0.0] }
//! rx = { pos = [10.0, 0.0], mobile = true, step = 0.2 }
//! robots = [{ pos = [0.0, 0.0] }, { pos = [2.0, 0.0] }]
//!
//! [annealing]          # optional, partial tables allowed
//! [controller]         # optional
//! [mobility]           # optional: default_step, bounds_margin, start_iteration
//! ```
//!
//! Node ids are assigned in document order starting at 1: each flow takes
//! its transmitter, then its robots, then its receiver.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annealer::AnnealingSchedule;
use crate::channel::ChannelParams;
use crate::distributed::{ControllerParams, EndpointMotion, MobilityModel};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Position};
use crate::network::{FlowSpec, NetworkState, NodeId, Topology};

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointDoc {
    pub pos: Position,
    #[serde(default)]
    pub mobile: bool,
    /// Random-walk step for a mobile endpoint; falls back to
    /// `mobility.default_step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl EndpointDoc {
    pub fn fixed(pos: Position) -> Self {
        EndpointDoc {
            pos,
            mobile: false,
            step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDoc {
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDoc {
    pub tx: EndpointDoc,
    pub rx: EndpointDoc,
    #[serde(default)]
    pub robots: Vec<RobotDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityDoc {
    pub default_step: f64,
    /// Walk bounds: bounding box of all initial positions grown by this.
    pub bounds_margin: f64,
    pub start_iteration: u64,
}

impl Default for MobilityDoc {
    fn default() -> Self {
        MobilityDoc {
            default_step: 0.2,
            bounds_margin: 2.0,
            start_iteration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: ChannelParams,
    pub flows: Vec<FlowDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annealing: Option<AnnealingSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobility: Option<MobilityDoc>,
}

/// A validated scenario with node ids assigned and defaults resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub params: ChannelParams,
    pub topology: Topology,
    pub initial: NetworkState,
    pub schedule: AnnealingSchedule,
    pub controller: ControllerParams,
    pub mobility: MobilityModel,
}

fn check_position(field: String, p: &Position) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("non-finite coordinate {p}")))
    }
}

impl ScenarioDoc {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::validation(
                "format_version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", self.format_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::validation("seed", "must fit in a signed 64-bit integer"));
        }
        self.channel.validate()?;
        if self.flows.is_empty() {
            return Err(Error::validation("flows", "at least one flow is required"));
        }
        for (i, flow) in self.flows.iter().enumerate() {
            for (end, doc) in [("tx", &flow.tx), ("rx", &flow.rx)] {
                check_position(format!("flows[{i}].{end}.pos"), &doc.pos)?;
                if let Some(step) = doc.step {
                    if !(step.is_finite() && step >= 0.0) {
                        return Err(Error::validation(
                            format!("flows[{i}].{end}.step"),
                            format!("must be >= 0, got {step}"),
                        ));
                    }
                }
            }
            for (j, r) in flow.robots.iter().enumerate() {
                check_position(format!("flows[{i}].robots[{j}].pos"), &r.pos)?;
            }
        }
        if let Some(a) = &self.annealing {
            a.validate()?;
        }
        if let Some(c) = &self.controller {
            c.validate()?;
        }
        if let Some(m) = &self.mobility {
            if !(m.default_step.is_finite() && m.default_step >= 0.0) {
                return Err(Error::validation(
                    "mobility.default_step",
                    format!("must be >= 0, got {}", m.default_step),
                ));
            }
            if !(m.bounds_margin.is_finite() && m.bounds_margin >= 0.0) {
                return Err(Error::validation(
                    "mobility.bounds_margin",
                    format!("must be >= 0, got {}", m.bounds_margin),
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Resolves node ids and defaults.
    pub fn build(&self) -> Result<Scenario> {
        self.validate()?;
        let mobility_doc = self.mobility.unwrap_or_default();
        let mut next_id = 1u32;
        let mut take = || {
            let id = NodeId(next_id);
            next_id += 1;
            id
        };

        let mut flows = Vec::with_capacity(self.flows.len());
        let mut positions = BTreeMap::new();
        let mut endpoints = BTreeMap::new();
        for (i, doc) in self.flows.iter().enumerate() {
            let tx = take();
            positions.insert(tx, doc.tx.pos);
            let robots: Vec<NodeId> = doc
                .robots
                .iter()
                .map(|r| {
                    let id = take();
                    positions.insert(id, r.pos);
                    id
                })
                .collect();
            let rx = take();
            positions.insert(rx, doc.rx.pos);

            for (id, end) in [(tx, &doc.tx), (rx, &doc.rx)] {
                let motion = if end.mobile {
                    EndpointMotion::RandomWalk {
                        step: end.step.unwrap_or(mobility_doc.default_step),
                    }
                } else {
                    EndpointMotion::Static
                };
                endpoints.insert(id, motion);
            }
            flows.push(FlowSpec {
                flow_id: i + 1,
                tx,
                rx,
                robots,
                tx_mobile: doc.tx.mobile,
                rx_mobile: doc.rx.mobile,
            });
        }

        let topology = Topology::new(flows)?;
        let bounds = Bounds::enclosing(positions.values(), mobility_doc.bounds_margin);
        Ok(Scenario {
            name: self.name.clone(),
            seed: self.seed,
            params: self.channel,
            topology,
            initial: NetworkState::new(positions),
            schedule: self.annealing.unwrap_or_default(),
            controller: self.controller.unwrap_or_default(),
            mobility: MobilityModel {
                endpoints,
                bounds,
                start_iteration: mobility_doc.start_iteration,
            },
        })
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioDoc> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.validate()?;
    Ok(doc)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

pub fn write_scenario(doc: &ScenarioDoc, path: &Path) -> Result<()> {
    crate::trace::write_atomic(path, doc.to_toml()?.as_bytes())
}

const SHIPPED: &[(&str, &str)] = &[
    (
        "two_flow_table3_noise0_6",
        include_str!("../scenarios/two_flow_table3_noise0_6.toml"),
    ),
    (
        "two_flow_table3_noise1",
        include_str!("../scenarios/two_flow_table3_noise1.toml"),
    ),
    (
        "two_flow_table3_noise2",
        include_str!("../scenarios/two_flow_table3_noise2.toml"),
    ),
    (
        "two_flow_table3_noise3",
        include_str!("../scenarios/two_flow_table3_noise3.toml"),
    ),
    (
        "two_flow_table3_noise4",
        include_str!("../scenarios/two_flow_table3_noise4.toml"),
    ),
    (
        "two_flow_table3_noise10",
        include_str!("../scenarios/two_flow_table3_noise10.toml"),
    ),
    ("two_flow_scan", include_str!("../scenarios/two_flow_scan.toml")),
    ("four_flow_static", include_str!("../scenarios/four_flow_static.toml")),
    ("four_flow_mobile", include_str!("../scenarios/four_flow_mobile.toml")),
];

/// Names of the scenarios compiled into the library.
pub fn shipped_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

/// Source text of a shipped scenario.
pub fn shipped_source(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn shipped(name: &str) -> Option<Result<ScenarioDoc>> {
    shipped_source(name).map(parse_scenario)
}

/// Loads `source` as a file path, falling back to a shipped scenario name.
pub fn resolve(source: &str) -> Result<ScenarioDoc> {
    let path = Path::new(source);
    if path.exists() {
        return load_scenario(path);
    }
    match shipped(source) {
        Some(doc) => doc,
        None => load_scenario(path),
    }
}
