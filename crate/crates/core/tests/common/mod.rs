//! Helpers shared by the integration tests. Each test binary uses a subset.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routerplace::{ChannelParams, FlowSpec, NetworkState, NodeId, Position, Topology};

/// Plain-array description of a network, kept apart from the library types
/// so the oracle below shares no code with the implementation.
#[derive(Debug, Clone)]
pub struct RawNet {
    /// Node `i` has id `i + 1`.
    pub xy: Vec<(f64, f64)>,
    /// Each flow as its hop sequence of node indices, tx first and rx last.
    pub paths: Vec<Vec<usize>>,
}

impl RawNet {
    pub fn topology(&self) -> Topology {
        let flows = self
            .paths
            .iter()
            .enumerate()
            .map(|(f, p)| {
                let id = |i: usize| NodeId(i as u32 + 1);
                FlowSpec::new(
                    f + 1,
                    id(p[0]),
                    p[1..p.len() - 1].iter().map(|&i| id(i)).collect(),
                    id(p[p.len() - 1]),
                )
            })
            .collect();
        Topology::new(flows).expect("valid topology")
    }

    pub fn state(&self) -> NetworkState {
        let positions: BTreeMap<_, _> = self
            .xy
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (NodeId(i as u32 + 1), Position::new(x, y)))
            .collect();
        NetworkState::new(positions)
    }

    /// Every node that radiates: all path nodes except the final receiver.
    fn radiates(&self, node: usize) -> bool {
        self.paths.iter().any(|p| p[..p.len() - 1].contains(&node))
    }

    fn is_endpoint_tx(&self, node: usize) -> bool {
        self.paths.iter().any(|p| p[0] == node)
    }

    /// Brute-force SINR of every link, flow by flow, straight from the
    /// path-loss sum written out longhand.
    pub fn brute_sinrs(&self, eta: f64, p_t: f64, p_m: f64, p_n: f64, dmin: f64) -> Vec<Vec<f64>> {
        let gain = |a: usize, b: usize| {
            let (dx, dy) = (self.xy[a].0 - self.xy[b].0, self.xy[a].1 - self.xy[b].1);
            let d = (dx * dx + dy * dy).sqrt();
            let d = if d < dmin { dmin } else { d };
            d.powf(-eta)
        };
        let power = |n: usize| if self.is_endpoint_tx(n) { p_t } else { p_m };
        self.paths
            .iter()
            .map(|p| {
                (0..p.len() - 1)
                    .map(|j| {
                        let (tx, rx) = (p[j], p[j + 1]);
                        let mut denom = p_n;
                        for k in 0..self.xy.len() {
                            if k != tx && k != rx && self.radiates(k) {
                                denom += power(k) * gain(k, rx);
                            }
                        }
                        power(tx) * gain(tx, rx) / denom
                    })
                    .collect()
            })
            .collect()
    }
}

/// Random network with 1..=`max_flows` flows of 0..=`max_robots` robots each,
/// nodes uniform in a square of side `extent`.
pub fn random_net(rng: &mut impl Rng, max_flows: usize, max_robots: usize, extent: f64) -> RawNet {
    let flows = rng.gen_range(1..=max_flows);
    let mut paths = Vec::new();
    let mut n = 0;
    for _ in 0..flows {
        let hops = rng.gen_range(0..=max_robots) + 2;
        paths.push((n..n + hops).collect());
        n += hops;
    }
    let xy = (0..n)
        .map(|_| (rng.gen_range(-extent..extent), rng.gen_range(-extent..extent)))
        .collect();
    RawNet { xy, paths }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(p_t: f64, p_m: f64, p_n: f64) -> ChannelParams {
    ChannelParams {
        p_t,
        p_m,
        p_n,
        ..ChannelParams::default()
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The two-flow cross with the labels used throughout: flow 1 is nodes
/// 1, 2, 3, 4 and flow 2 is nodes 5, 6, 7, 8.
pub fn cross(robots: [(f64, f64); 4]) -> RawNet {
    RawNet {
        xy: vec![
            (-10.0, 0.0),
            robots[0],
            robots[1],
            (10.0, 0.0),
            (0.0, 10.0),
            robots[2],
            robots[3],
            (0.0, -10.0),
        ],
        paths: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
    }
}

/// Oracle check of every link in `net`; returns the worst relative error.
pub fn worst_oracle_error(net: &RawNet, p: &ChannelParams) -> f64 {
    let topo = net.topology();
    let state = net.state();
    let want = net.brute_sinrs(p.eta, p.p_t, p.p_m, p.p_n, p.min_distance);
    let mut worst: f64 = 0.0;
    for (f, flow) in want.iter().enumerate() {
        let links = topo.links(f + 1).unwrap();
        assert_eq!(links.len(), flow.len());
        for (link, &w) in links.iter().zip(flow) {
            let got = topo.link_sinr_in_state(link, &state, p).unwrap();
            worst = worst.max(rel_err(got, w));
        }
    }
    worst
}
