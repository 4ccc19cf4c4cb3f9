//! Decentralized per-flow controller.
//!
//! Each iteration has two phases. The measurement phase ([`stat_round`])
//! gives every flow a consistent snapshot of its link SINRs; each flow then
//! knows its bottleneck (lowest SINR) and pseudo-bottleneck (second lowest)
//! link. In the movement phase ([`modal_decide`]) a robot on one of those
//! links evaluates its flow's cost at `K` equally spaced points on a circle
//! of radius `delta`, holding every other node fixed, and moves to the best
//! point only if that strictly beats the current flow cost.
//!
//! Moves are applied immediately and in a fixed order (flows ascending, then
//! node id ascending), so later decisions in the same iteration see earlier
//! moves. Pseudo-bottleneck robots are only consulted when no bottleneck
//! robot of the flow moved.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::{distance, Bounds, Position};
use crate::network::{lowest_two, Link, NetworkState, NodeId, NodeRole, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// Step length, meters.
    pub delta: f64,
    /// Number of candidate points on the step circle.
    pub candidate_count: usize,
    pub max_iterations: u64,
    /// Endpoint displacement above which a converged controller restarts.
    pub change_threshold: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            delta: 0.25,
            candidate_count: 36,
            max_iterations: 2000,
            change_threshold: 1e-6,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::validation(
                "controller.delta",
                format!("must be > 0, got {}", self.delta),
            ));
        }
        if self.candidate_count < 3 {
            return Err(Error::validation(
                "controller.candidate_count",
                format!("must be >= 3, got {}", self.candidate_count),
            ));
        }
        if !(self.change_threshold.is_finite() && self.change_threshold >= 0.0) {
            return Err(Error::validation(
                "controller.change_threshold",
                format!("must be >= 0, got {}", self.change_threshold),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrReport {
    pub flow_id: usize,
    pub link_index: usize,
    pub sinr: f64,
    /// Receiving end of the link, which measures it.
    pub reporter: NodeId,
    pub iteration: u64,
}

/// Every link's SINR, grouped by flow and ordered by link index.
pub fn stat_round(
    state: &NetworkState,
    params: &ChannelParams,
    topology: &Topology,
) -> Result<BTreeMap<usize, Vec<SinrReport>>> {
    let mut out = BTreeMap::new();
    for flow in topology.flows() {
        let reports = topology
            .links(flow.flow_id)?
            .iter()
            .map(|link| {
                Ok(SinrReport {
                    flow_id: link.flow_id,
                    link_index: link.index,
                    sinr: topology.link_sinr_in_state(link, state, params)?,
                    reporter: link.rx_node,
                    iteration: state.iteration,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(flow.flow_id, reports);
    }
    Ok(out)
}

/// `k` points at angles `2*pi*i/k` (counter-clockwise from +x) on the circle
/// of radius `delta` around `center`.
pub fn candidate_points(center: Position, delta: f64, k: usize) -> Result<Vec<Position>> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::validation("delta", format!("must be > 0, got {delta}")));
    }
    if k < 3 {
        return Err(Error::validation("candidate_count", format!("must be >= 3, got {k}")));
    }
    Ok((0..k)
        .map(|i| {
            let a = TAU * i as f64 / k as f64;
            center.offset(delta * a.cos(), delta * a.sin())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveAction {
    Stay,
    MoveTo(Position),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveDecision {
    pub robot: NodeId,
    pub action: MoveAction,
    /// Flow cost the decision achieves, with the rest of the network frozen.
    pub flow_cost: f64,
}

impl MoveDecision {
    pub fn moves(&self) -> bool {
        matches!(self.action, MoveAction::MoveTo(_))
    }
}

/// Picks the best point on `robot`'s step circle for its flow's cost.
pub fn modal_decide(
    robot: NodeId,
    flow_id: usize,
    state: &NetworkState,
    params: &ChannelParams,
    ctrl: &ControllerParams,
    topology: &Topology,
) -> Result<MoveDecision> {
    if topology.role(robot)? != NodeRole::Robot {
        return Err(Error::validation("robot", format!("node {robot} is not a robot")));
    }
    if !topology.flow(flow_id)?.robots.contains(&robot) {
        return Err(Error::validation(
            "robot",
            format!("node {robot} is not part of flow {flow_id}"),
        ));
    }
    let current = topology.flow_cost(flow_id, state, params)?;
    let candidates = candidate_points(state.position(robot)?, ctrl.delta, ctrl.candidate_count)?;

    let mut best: Option<(Position, f64)> = None;
    let mut probe = state.clone();
    for c in candidates {
        probe.set_position(robot, c);
        let cost = topology.flow_cost(flow_id, &probe, params)?;
        // strict comparison keeps the lowest angle index among ties
        if best.is_none_or(|(_, b)| cost > b) {
            best = Some((c, cost));
        }
    }

    Ok(match best {
        Some((target, cost)) if cost > current => MoveDecision {
            robot,
            action: MoveAction::MoveTo(target),
            flow_cost: cost,
        },
        _ => MoveDecision {
            robot,
            action: MoveAction::Stay,
            flow_cost: current,
        },
    })
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: NetworkState,
    pub moved: bool,
    /// Every decision taken this iteration, in application order.
    pub decisions: Vec<MoveDecision>,
}

fn robot_endpoints(link: &Link, topology: &Topology) -> Result<Vec<NodeId>> {
    let mut out = Vec::with_capacity(2);
    for id in [link.tx_node, link.rx_node] {
        if topology.role(id)? == NodeRole::Robot {
            out.push(id);
        }
    }
    out.sort();
    Ok(out)
}

/// One measurement phase followed by one movement phase.
pub fn controller_step(
    state: &NetworkState,
    params: &ChannelParams,
    ctrl: &ControllerParams,
    topology: &Topology,
) -> Result<StepOutcome> {
    let reports = stat_round(state, params, topology)?;
    let mut next = state.clone();
    let mut decisions = Vec::new();

    for (&flow_id, flow_reports) in &reports {
        let sinrs: Vec<f64> = flow_reports.iter().map(|r| r.sinr).collect();
        let links = topology.links(flow_id)?;
        let Some((lo, second)) = lowest_two(&sinrs) else {
            continue;
        };

        let mut decided: Vec<NodeId> = Vec::new();
        let mut flow_moved = false;
        for robot in robot_endpoints(&links[lo], topology)? {
            let d = modal_decide(robot, flow_id, &next, params, ctrl, topology)?;
            if let MoveAction::MoveTo(p) = d.action {
                next.set_position(robot, p);
                flow_moved = true;
            }
            decided.push(robot);
            decisions.push(d);
        }
        if flow_moved {
            continue;
        }
        if let Some(j) = second {
            for robot in robot_endpoints(&links[j], topology)? {
                if decided.contains(&robot) {
                    continue;
                }
                let d = modal_decide(robot, flow_id, &next, params, ctrl, topology)?;
                if let MoveAction::MoveTo(p) = d.action {
                    next.set_position(robot, p);
                }
                decisions.push(d);
            }
        }
    }

    let moved = decisions.iter().any(MoveDecision::moves);
    Ok(StepOutcome {
        state: next,
        moved,
        decisions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EndpointMotion {
    Static,
    /// Uniform direction, uniform length in `[0, step]`.
    RandomWalk {
        step: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MobilityModel {
    pub endpoints: BTreeMap<NodeId, EndpointMotion>,
    /// Walks are clipped to this rectangle.
    pub bounds: Option<Bounds>,
    /// First controller iteration at which walking endpoints move.
    pub start_iteration: u64,
}

impl MobilityModel {
    pub fn is_static(&self) -> bool {
        self.endpoints.values().all(|m| matches!(m, EndpointMotion::Static))
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        for (&id, motion) in &self.endpoints {
            if topology.role(id)? == NodeRole::Robot {
                return Err(Error::validation(
                    "mobility",
                    format!("node {id} is a robot, not an endpoint"),
                ));
            }
            if let EndpointMotion::RandomWalk { step } = motion {
                if !(step.is_finite() && *step >= 0.0) {
                    return Err(Error::validation("mobility.step", format!("must be >= 0, got {step}")));
                }
            }
        }
        Ok(())
    }
}

/// Moves every walking endpoint once. Robots and static endpoints are left
/// alone.
pub fn mobility_step<R: Rng + ?Sized>(
    state: &NetworkState,
    mobility: &MobilityModel,
    rng: &mut R,
) -> Result<NetworkState> {
    let mut next = state.clone();
    for (&id, motion) in &mobility.endpoints {
        let EndpointMotion::RandomWalk { step } = *motion else {
            continue;
        };
        let theta = TAU * rng.gen::<f64>();
        let len = step * rng.gen::<f64>();
        let p = state.position(id)?.offset(len * theta.cos(), len * theta.sin());
        let p = match &mobility.bounds {
            Some(b) => b.clamp(p),
            None => p,
        };
        next.set_position(id, p);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedRecord {
    pub iteration: u64,
    /// State after both the controller and mobility updates.
    pub state: NetworkState,
    pub flow_costs: Vec<f64>,
    pub global_cost: f64,
    pub robots_moved: bool,
    /// Largest endpoint displacement this iteration.
    pub endpoint_displacement: f64,
    /// The controller had settled and an endpoint change woke it up.
    pub restarted: bool,
    /// Robot positions repeated a configuration already visited since the
    /// last endpoint change.
    pub cycle_detected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedTrace {
    pub initial_flow_costs: Vec<f64>,
    pub records: Vec<DistributedRecord>,
    /// Stopped because nothing moved (or the robots entered a cycle) rather
    /// than by the iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DistributedOutcome {
    pub final_state: NetworkState,
    pub trace: DistributedTrace,
}

/// Runs the controller until nothing moves, or until `max_iterations`.
///
/// With walking endpoints the run always lasts `max_iterations`: a settled
/// controller stays idle until an endpoint moves by more than
/// `change_threshold`, then resumes.
pub fn run_distributed(
    initial: &NetworkState,
    params: &ChannelParams,
    ctrl: &ControllerParams,
    mobility: &MobilityModel,
    topology: &Topology,
    seed: u64,
) -> Result<DistributedOutcome> {
    params.validate()?;
    ctrl.validate()?;
    mobility.validate(topology)?;
    topology.validate_state(initial)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut settled = false;
    let mut converged = false;
    let endpoints: Vec<NodeId> = mobility.endpoints.keys().copied().collect();
    let robots: Vec<NodeId> = topology.robots().collect();
    let mut visited: HashSet<Vec<(i64, i64)>> = HashSet::new();
    visited.insert(robot_key(&state, &robots)?);

    for iteration in 1..=ctrl.max_iterations {
        let step = if settled {
            StepOutcome {
                state: state.clone(),
                moved: false,
                decisions: Vec::new(),
            }
        } else {
            controller_step(&state, params, ctrl, topology)?
        };
        let mut next = step.state;
        if iteration >= mobility.start_iteration {
            next = mobility_step(&next, mobility, &mut rng)?;
        }
        let mut displacement: f64 = 0.0;
        for &id in &endpoints {
            displacement = displacement.max(distance(&state.position(id)?, &next.position(id)?));
        }
        next.iteration = iteration;

        let changed = displacement > ctrl.change_threshold;
        let restarted = settled && changed;
        let mut cycle_detected = false;
        if changed {
            visited.clear();
            visited.insert(robot_key(&next, &robots)?);
        } else if step.moved {
            cycle_detected = !visited.insert(robot_key(&next, &robots)?);
        }
        settled = !changed && (!step.moved || cycle_detected);

        let flow_costs = topology.flow_costs(&next, params)?;
        let global_cost = flow_costs.iter().copied().fold(f64::INFINITY, f64::min);
        records.push(DistributedRecord {
            iteration,
            state: next.clone(),
            flow_costs,
            global_cost,
            robots_moved: step.moved,
            endpoint_displacement: displacement,
            restarted,
            cycle_detected,
        });
        state = next;

        if settled && mobility.is_static() {
            converged = true;
            break;
        }
    }

    Ok(DistributedOutcome {
        final_state: state,
        trace: DistributedTrace {
            initial_flow_costs: topology.flow_costs(initial, params)?,
            records,
            converged,
        },
    })
}

/// Robot positions quantized to a nanometer grid, so that a step of `delta`
/// followed by its reverse maps back to the same key.
fn robot_key(state: &NetworkState, robots: &[NodeId]) -> Result<Vec<(i64, i64)>> {
    const GRID: f64 = 1e9;
    robots
        .iter()
        .map(|&id| {
            let p = state.position(id)?;
            Ok(((p.x * GRID).round() as i64, (p.y * GRID).round() as i64))
        })
        .collect()
}
