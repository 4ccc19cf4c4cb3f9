//! Placement and mobility control of robotic router nodes.
//!
//! A set of transmitter/receiver flows is relayed through ordered chains of
//! mobile robots. Every transmitter and robot transmits simultaneously, so
//! each link sees interference from every other transmitting node. The
//! objective is the minimum link SINR over the whole network, and two
//! optimizers are provided:
//!
//! - [`annealer`]: a centralized simulated-annealing search over all robot
//!   positions.
//! - [`distributed`]: a per-flow controller in which robots on the weakest
//!   links step along a discretized circle to raise their flow's cost.
//!
//! [`scenario`] and [`trace`] handle the on-disk formats, and [`cli`] holds
//! the command implementations behind the `routerplace` binary.

pub mod annealer;
pub mod channel;
pub mod cli;
pub mod distributed;
pub mod error;
pub mod geometry;
pub mod network;
pub mod scenario;
pub mod trace;

pub use channel::{link_sinr, received_power, ChannelParams, Emitter};
pub use error::{Error, Result};
pub use geometry::{distance, Position};
pub use network::{FlowSpec, Link, NetworkState, NodeId, NodeRole, Topology};
