//! Flows, links, interference sets and the max-min objective.
//!
//! Every transmitter and every robot is assumed to transmit at all times, so
//! a link is interfered by every transmitting node other than its own two
//! endpoints. That includes the flow's own transmitter on downstream links.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelParams, Emitter};
use crate::error::{Error, Result};
use crate::geometry::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Transmitter,
    Receiver,
    Robot,
}

impl NodeRole {
    pub fn transmits(self) -> bool {
        !matches!(self, NodeRole::Receiver)
    }
}

/// One transmitter/receiver pair and the robots relaying between them,
/// ordered from the transmitter side.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// 1-based flow index.
    pub flow_id: usize,
    pub tx: NodeId,
    pub rx: NodeId,
    pub robots: Vec<NodeId>,
    pub tx_mobile: bool,
    pub rx_mobile: bool,
}

impl FlowSpec {
    pub fn new(flow_id: usize, tx: NodeId, robots: Vec<NodeId>, rx: NodeId) -> Self {
        FlowSpec {
            flow_id,
            tx,
            rx,
            robots,
            tx_mobile: false,
            rx_mobile: false,
        }
    }

    /// Every node on the path, transmitter first.
    pub fn path(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.tx)
            .chain(self.robots.iter().copied())
            .chain(std::iter::once(self.rx))
    }

    pub fn link_count(&self) -> usize {
        self.robots.len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Link {
    pub flow_id: usize,
    /// 1-based, counted from the flow's transmitter.
    pub index: usize,
    pub tx_node: NodeId,
    pub rx_node: NodeId,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}{}({}->{})", self.flow_id, self.index, self.tx_node, self.rx_node)
    }
}

/// `[tx -> r1, r1 -> r2, ..., rk -> rx]`.
pub fn build_links(flow: &FlowSpec) -> Vec<Link> {
    let path: Vec<NodeId> = flow.path().collect();
    path.windows(2)
        .enumerate()
        .map(|(j, w)| Link {
            flow_id: flow.flow_id,
            index: j + 1,
            tx_node: w[0],
            rx_node: w[1],
        })
        .collect()
}

/// Transmitting nodes across all flows, minus the link's own endpoints.
pub fn interferers(link: &Link, flows: &[FlowSpec]) -> BTreeSet<NodeId> {
    flows
        .iter()
        .flat_map(|f| std::iter::once(f.tx).chain(f.robots.iter().copied()))
        .filter(|&n| n != link.tx_node && n != link.rx_node)
        .collect()
}

/// Node positions at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkState {
    pub positions: BTreeMap<NodeId, Position>,
    pub iteration: u64,
}

impl NetworkState {
    pub fn new(positions: BTreeMap<NodeId, Position>) -> Self {
        NetworkState {
            positions,
            iteration: 0,
        }
    }

    pub fn position(&self, id: NodeId) -> Result<Position> {
        self.positions.get(&id).copied().ok_or(Error::MissingPosition(id))
    }

    pub fn set_position(&mut self, id: NodeId, p: Position) {
        self.positions.insert(id, p);
    }

    pub fn with_position(&self, id: NodeId, p: Position) -> NetworkState {
        let mut next = self.clone();
        next.set_position(id, p);
        next
    }
}

/// Validated set of flows with cached links and interference sets.
#[derive(Debug, Clone)]
pub struct Topology {
    flows: Vec<FlowSpec>,
    roles: BTreeMap<NodeId, NodeRole>,
    links: Vec<Vec<Link>>,
    interferers: Vec<Vec<Vec<NodeId>>>,
}

impl Topology {
    pub fn new(flows: Vec<FlowSpec>) -> Result<Self> {
        if flows.is_empty() {
            return Err(Error::validation("flows", "at least one flow is required"));
        }
        let mut roles = BTreeMap::new();
        for (i, flow) in flows.iter().enumerate() {
            if flow.flow_id != i + 1 {
                return Err(Error::validation(
                    "flows",
                    format!(
                        "flow ids must be 1..n in order, found {} at position {}",
                        flow.flow_id,
                        i + 1
                    ),
                ));
            }
            let tagged = std::iter::once((flow.tx, NodeRole::Transmitter))
                .chain(flow.robots.iter().map(|&r| (r, NodeRole::Robot)))
                .chain(std::iter::once((flow.rx, NodeRole::Receiver)));
            for (id, role) in tagged {
                if roles.insert(id, role).is_some() {
                    return Err(Error::validation("flows", format!("node {id} appears more than once")));
                }
            }
        }
        let links: Vec<Vec<Link>> = flows.iter().map(build_links).collect();
        let interferers = links
            .iter()
            .map(|ls| {
                ls.iter()
                    .map(|l| interferers(l, &flows).into_iter().collect())
                    .collect()
            })
            .collect();
        Ok(Topology {
            flows,
            roles,
            links,
            interferers,
        })
    }

    pub fn flows(&self) -> &[FlowSpec] {
        &self.flows
    }

    pub fn flow_count(&self) -> usize {
        self.flows.len()
    }

    pub fn flow(&self, flow_id: usize) -> Result<&FlowSpec> {
        flow_id
            .checked_sub(1)
            .and_then(|i| self.flows.get(i))
            .ok_or(Error::UnknownFlow(flow_id))
    }

    pub fn links(&self, flow_id: usize) -> Result<&[Link]> {
        self.flow(flow_id)?;
        Ok(&self.links[flow_id - 1])
    }

    pub fn all_links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().flatten()
    }

    pub fn role(&self, id: NodeId) -> Result<NodeRole> {
        self.roles.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeRole)> + '_ {
        self.roles.iter().map(|(&id, &r)| (id, r))
    }

    pub fn robots(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.flows.iter().flat_map(|f| f.robots.iter().copied())
    }

    /// Flow that `id` belongs to.
    pub fn flow_of(&self, id: NodeId) -> Result<usize> {
        self.flows
            .iter()
            .find(|f| f.path().any(|n| n == id))
            .map(|f| f.flow_id)
            .ok_or(Error::UnknownNode(id))
    }

    /// Cached interference set of `link`, in ascending id order.
    pub fn interferers_of(&self, link: &Link) -> Result<&[NodeId]> {
        let per_flow = self
            .interferers
            .get(link.flow_id.wrapping_sub(1))
            .ok_or(Error::UnknownFlow(link.flow_id))?;
        per_flow
            .get(link.index.wrapping_sub(1))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::validation("link", format!("no link {link} in flow {}", link.flow_id)))
    }

    /// Transmit power of a node: `p_t` for transmitters, `p_m` for robots.
    pub fn power_of(&self, id: NodeId, params: &ChannelParams) -> Result<f64> {
        match self.role(id)? {
            NodeRole::Transmitter => Ok(params.p_t),
            NodeRole::Robot => Ok(params.p_m),
            NodeRole::Receiver => Err(Error::validation("node", format!("receiver {id} does not transmit"))),
        }
    }

    /// Checks that every node has a finite position.
    pub fn validate_state(&self, state: &NetworkState) -> Result<()> {
        for id in self.roles.keys() {
            let p = state.position(*id)?;
            if !p.is_finite() {
                return Err(Error::validation(
                    format!("position of node {id}"),
                    "non-finite coordinate",
                ));
            }
        }
        Ok(())
    }

    pub fn link_sinr_in_state(&self, link: &Link, state: &NetworkState, params: &ChannelParams) -> Result<f64> {
        let emitters = self
            .interferers_of(link)?
            .iter()
            .map(|&id| Ok(Emitter::new(state.position(id)?, self.power_of(id, params)?)))
            .collect::<Result<Vec<_>>>()?;
        channel::link_sinr(
            &state.position(link.tx_node)?,
            &state.position(link.rx_node)?,
            self.power_of(link.tx_node, params)?,
            &emitters,
            params,
        )
    }

    /// SINR of every link of a flow, ordered by link index.
    pub fn flow_sinrs(&self, flow_id: usize, state: &NetworkState, params: &ChannelParams) -> Result<Vec<f64>> {
        self.links(flow_id)?
            .iter()
            .map(|l| self.link_sinr_in_state(l, state, params))
            .collect()
    }

    /// SINR of every link, grouped by flow.
    pub fn all_sinrs(&self, state: &NetworkState, params: &ChannelParams) -> Result<Vec<Vec<f64>>> {
        (1..=self.flow_count())
            .map(|i| self.flow_sinrs(i, state, params))
            .collect()
    }

    /// Minimum link SINR of a flow.
    pub fn flow_cost(&self, flow_id: usize, state: &NetworkState, params: &ChannelParams) -> Result<f64> {
        let sinrs = self.flow_sinrs(flow_id, state, params)?;
        Ok(sinrs.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Minimum flow cost across the network.
    pub fn global_cost(&self, state: &NetworkState, params: &ChannelParams) -> Result<f64> {
        (1..=self.flow_count()).try_fold(f64::INFINITY, |acc, i| Ok(acc.min(self.flow_cost(i, state, params)?)))
    }

    /// Per-flow costs, ordered by flow id.
    pub fn flow_costs(&self, state: &NetworkState, params: &ChannelParams) -> Result<Vec<f64>> {
        (1..=self.flow_count())
            .map(|i| self.flow_cost(i, state, params))
            .collect()
    }

    /// Lowest and second-lowest SINR links of a flow.
    pub fn bottleneck_links(
        &self,
        flow_id: usize,
        state: &NetworkState,
        params: &ChannelParams,
    ) -> Result<(Link, Option<Link>)> {
        let sinrs = self.flow_sinrs(flow_id, state, params)?;
        let links = self.links(flow_id)?;
        let (lo, second) = lowest_two(&sinrs).expect("a flow always has at least one link");
        Ok((links[lo], second.map(|j| links[j])))
    }
}

/// Indices of the smallest and second-smallest values; ties go to the lower
/// index.
pub fn lowest_two(values: &[f64]) -> Option<(usize, Option<usize>)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let first = *order.first()?;
    Some((first, order.get(1).copied()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    pub(crate) fn two_flow_sample() -> Vec<FlowSpec> {
        vec![
            FlowSpec::new(1, NodeId(1), ids(&[2, 3]), NodeId(4)),
            FlowSpec::new(2, NodeId(5), ids(&[6, 7]), NodeId(8)),
        ]
    }

    #[test]
    fn links_of_sample_flow() {
        let links = build_links(&two_flow_sample()[0]);
        let pairs: Vec<_> = links.iter().map(|l| (l.index, l.tx_node.0, l.rx_node.0)).collect();
        assert_eq!(pairs, vec![(1, 1, 2), (2, 2, 3), (3, 3, 4)]);
        for w in links.windows(2) {
            assert_eq!(w[0].rx_node, w[1].tx_node);
        }
    }

    #[test]
    fn links_of_short_flows() {
        let direct = FlowSpec::new(1, NodeId(5), vec![], NodeId(8));
        let links = build_links(&direct);
        assert_eq!(links.len(), 1);
        assert_eq!((links[0].tx_node, links[0].rx_node), (NodeId(5), NodeId(8)));

        let one = FlowSpec::new(1, NodeId(1), ids(&[2]), NodeId(3));
        assert_eq!(build_links(&one).len(), 2);
    }

    #[test]
    fn interference_table() {
        let flows = two_flow_sample();
        let expect: [(u32, u32, &[u32]); 6] = [
            (1, 2, &[3, 5, 6, 7]),
            (2, 3, &[1, 5, 6, 7]),
            (3, 4, &[1, 2, 5, 6, 7]),
            (5, 6, &[1, 2, 3, 7]),
            (6, 7, &[1, 2, 3, 5]),
            (7, 8, &[1, 2, 3, 5, 6]),
        ];
        let all: Vec<Link> = flows.iter().flat_map(build_links).collect();
        for (tx, rx, want) in expect {
            let link = all.iter().find(|l| l.tx_node.0 == tx && l.rx_node.0 == rx).unwrap();
            let got: Vec<u32> = interferers(link, &flows).into_iter().map(|n| n.0).collect();
            assert_eq!(got, want, "link {link}");
        }
    }

    #[test]
    fn single_flow_single_robot_first_link_has_no_interferers() {
        let flows = vec![FlowSpec::new(1, NodeId(1), ids(&[2]), NodeId(3))];
        let link = build_links(&flows[0])[0];
        assert!(interferers(&link, &flows).is_empty());
    }

    #[test]
    fn topology_rejects_duplicates_and_empty() {
        assert!(Topology::new(vec![]).is_err());
        let dup = vec![
            FlowSpec::new(1, NodeId(1), ids(&[2]), NodeId(3)),
            FlowSpec::new(2, NodeId(3), vec![], NodeId(4)),
        ];
        assert!(matches!(Topology::new(dup), Err(Error::Validation { .. })));
        let misnumbered = vec![FlowSpec::new(2, NodeId(1), vec![], NodeId(2))];
        assert!(Topology::new(misnumbered).is_err());
    }

    #[test]
    fn lowest_two_tie_breaks_by_index() {
        assert_eq!(lowest_two(&[0.5, 0.2, 0.9]), Some((1, Some(0))));
        assert_eq!(lowest_two(&[0.2, 0.2, 0.9]), Some((0, Some(1))));
        assert_eq!(lowest_two(&[0.7]), Some((0, None)));
        assert_eq!(lowest_two(&[]), None);
    }

    #[test]
    fn single_flow_matches_plain_link_sinr() {
        let topo = Topology::new(vec![FlowSpec::new(1, NodeId(1), vec![], NodeId(2))]).unwrap();
        let mut state = NetworkState::default();
        state.set_position(NodeId(1), Position::new(0.0, 0.0));
        state.set_position(NodeId(2), Position::new(0.0, 2.0));
        let params = ChannelParams {
            p_n: 0.05,
            ..Default::default()
        };
        let link = topo.links(1).unwrap()[0];
        let s = topo.link_sinr_in_state(&link, &state, &params).unwrap();
        assert!((s - 5.0).abs() < 1e-12);
        assert_eq!(topo.flow_cost(1, &state, &params).unwrap(), s);
        assert_eq!(topo.global_cost(&state, &params).unwrap(), s);
        let (b, p) = topo.bottleneck_links(1, &state, &params).unwrap();
        assert_eq!((b, p), (link, None));
    }

    #[test]
    fn missing_position_is_reported() {
        let topo = Topology::new(two_flow_sample()).unwrap();
        let state = NetworkState::default();
        assert!(matches!(topo.validate_state(&state), Err(Error::MissingPosition(_))));
        assert!(topo.global_cost(&state, &ChannelParams::default()).is_err());
    }

    #[test]
    fn unknown_flow() {
        let topo = Topology::new(two_flow_sample()).unwrap();
        assert!(matches!(topo.flow(0), Err(Error::UnknownFlow(0))));
        assert!(matches!(topo.flow(3), Err(Error::UnknownFlow(3))));
        assert_eq!(topo.flow_of(NodeId(7)).unwrap(), 2);
    }
}
