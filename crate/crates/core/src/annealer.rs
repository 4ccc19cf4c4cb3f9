//! Centralized simulated annealing over robot positions.
//!
//! Each step displaces one robot inside a disc and accepts the result with
//! the Metropolis rule for a maximization problem: improvements always,
//! regressions with probability `exp(-(c_old - c_new) / T)`.
//!
//! The temperature is `t0 * best * alpha^(k / steps_per_temperature)`, where
//! `best` is the best global cost found so far. Tying it to the best cost
//! rather than the starting one keeps the acceptance rate sensible when the
//! starting layout is degenerate (robots stacked on one point give a cost
//! orders of magnitude below the optimum). The proposal radius shrinks
//! geometrically from `step_radius` to `final_step_radius` over the run and
//! robots are confined to the endpoints' bounding box plus a margin.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::Bounds;
use crate::network::{NetworkState, NodeRole, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingSchedule {
    /// Initial temperature, relative to the initial global cost.
    pub t0: f64,
    /// Geometric cooling factor per plateau.
    pub alpha: f64,
    pub iterations: u64,
    /// Proposal disc radius at the start of the run, meters.
    pub step_radius: f64,
    /// Proposal disc radius at the end of the run, meters.
    pub final_step_radius: f64,
    pub steps_per_temperature: u64,
    /// Robots are kept inside the endpoints' bounding box grown by this
    /// many meters.
    pub bounds_margin: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule {
            t0: 0.1,
            alpha: 0.95,
            iterations: 20_000,
            step_radius: 1.0,
            final_step_radius: 0.01,
            steps_per_temperature: 100,
            bounds_margin: 2.0,
        }
    }
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::validation(
                "annealing.t0",
                format!("must be > 0, got {}", self.t0),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(
                "annealing.alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if !(self.step_radius.is_finite() && self.step_radius > 0.0) {
            return Err(Error::validation(
                "annealing.step_radius",
                format!("must be > 0, got {}", self.step_radius),
            ));
        }
        if !(self.final_step_radius.is_finite() && self.final_step_radius > 0.0) {
            return Err(Error::validation(
                "annealing.final_step_radius",
                format!("must be > 0, got {}", self.final_step_radius),
            ));
        }
        if !(self.bounds_margin.is_finite() && self.bounds_margin >= 0.0) {
            return Err(Error::validation(
                "annealing.bounds_margin",
                format!("must be >= 0, got {}", self.bounds_margin),
            ));
        }
        if self.steps_per_temperature == 0 {
            return Err(Error::validation("annealing.steps_per_temperature", "must be >= 1"));
        }
        Ok(())
    }

    /// Temperature at step `k`: `t0 * scale * alpha^floor(k / steps_per_temperature)`.
    pub fn temperature(&self, k: u64, scale: f64) -> f64 {
        let plateau = (k / self.steps_per_temperature.max(1)) as f64;
        let t = self.t0 * scale * self.alpha.powf(plateau);
        // alpha^plateau underflows on very long runs
        t.max(f64::MIN_POSITIVE)
    }

    /// Proposal radius at step `k`.
    pub fn radius(&self, k: u64) -> f64 {
        if self.iterations <= 1 {
            return self.step_radius;
        }
        let frac = k as f64 / (self.iterations - 1) as f64;
        self.step_radius * (self.final_step_radius / self.step_radius).powf(frac)
    }
}

/// Bounding box of the flow endpoints in `state`, grown by `margin`.
pub fn endpoint_bounds(state: &NetworkState, topology: &Topology, margin: f64) -> Option<Bounds> {
    let endpoints: Vec<_> = topology
        .nodes()
        .filter(|(_, role)| *role != NodeRole::Robot)
        .filter_map(|(id, _)| state.positions.get(&id).copied())
        .collect();
    Bounds::enclosing(&endpoints, margin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealRecord {
    pub iteration: u64,
    /// Global cost of the chain's current state after this step.
    pub global_cost: f64,
    /// Best global cost seen so far.
    pub best_cost: f64,
    pub accepted: bool,
    pub temperature: f64,
    /// Per-flow costs of the current state.
    pub flow_costs: Vec<f64>,
    pub state: NetworkState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealTrace {
    pub initial_cost: f64,
    pub records: Vec<AnnealRecord>,
    /// Where the chain ended, which may differ from the best state returned.
    pub last_state: NetworkState,
}

impl AnnealTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.accepted).count() as f64 / self.records.len() as f64
    }
}

/// Moves one uniformly chosen robot by a uniform offset within a disc,
/// then clamps it into `bounds` if given.
pub fn propose_neighbor<R: Rng + ?Sized>(
    state: &NetworkState,
    step_radius: f64,
    bounds: Option<&Bounds>,
    rng: &mut R,
    topology: &Topology,
) -> Result<NetworkState> {
    let robots: Vec<_> = topology.robots().collect();
    if robots.is_empty() {
        return Ok(state.clone());
    }
    let robot = robots[rng.gen_range(0..robots.len())];
    let r = step_radius * rng.gen::<f64>().sqrt();
    let theta = TAU * rng.gen::<f64>();
    let p = state.position(robot)?.offset(r * theta.cos(), r * theta.sin());
    let p = match bounds {
        Some(b) => b.clamp(p),
        None => p,
    };
    Ok(state.with_position(robot, p))
}

/// Metropolis acceptance for a maximized cost.
///
/// An improvement is accepted without touching `rng`.
pub fn metropolis_accept<R: Rng + ?Sized>(c_old: f64, c_new: f64, temperature: f64, rng: &mut R) -> bool {
    if c_new > c_old {
        return true;
    }
    let p = (-(c_old - c_new) / temperature).exp();
    rng.gen::<f64>() < p
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    /// Best state visited.
    pub best: NetworkState,
    pub best_cost: f64,
    pub trace: AnnealTrace,
}

pub fn anneal(
    initial: &NetworkState,
    schedule: &AnnealingSchedule,
    params: &ChannelParams,
    topology: &Topology,
    seed: u64,
) -> Result<AnnealOutcome> {
    schedule.validate()?;
    params.validate()?;
    topology.validate_state(initial)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = initial.clone();
    let mut current_cost = topology.global_cost(&current, params)?;
    let initial_cost = current_cost;
    let bounds = endpoint_bounds(initial, topology, schedule.bounds_margin);

    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut records = Vec::with_capacity(schedule.iterations as usize);

    for k in 0..schedule.iterations {
        let temperature = schedule.temperature(k, best_cost.max(f64::MIN_POSITIVE));
        let mut candidate = propose_neighbor(&current, schedule.radius(k), bounds.as_ref(), &mut rng, topology)?;
        candidate.iteration = k + 1;
        let flow_costs = topology.flow_costs(&candidate, params)?;
        let candidate_cost = flow_costs.iter().copied().fold(f64::INFINITY, f64::min);

        let accepted = metropolis_accept(current_cost, candidate_cost, temperature, &mut rng);
        let flow_costs = if accepted {
            current = candidate;
            current_cost = candidate_cost;
            flow_costs
        } else {
            current.iteration = k + 1;
            topology.flow_costs(&current, params)?
        };
        if current_cost > best_cost {
            best_cost = current_cost;
            best = current.clone();
        }
        records.push(AnnealRecord {
            iteration: k + 1,
            global_cost: current_cost,
            best_cost,
            accepted,
            temperature,
            flow_costs,
            state: current.clone(),
        });
    }

    Ok(AnnealOutcome {
        best,
        best_cost,
        trace: AnnealTrace {
            initial_cost,
            records,
            last_state: current,
        },
    })
}
