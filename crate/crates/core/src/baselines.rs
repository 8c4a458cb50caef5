//! Static topology-control baselines: DLSS, DRNG and max power.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::net::{NetworkInstance, NodeId, PowerAssignment, PowerLevel};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("{algorithm} produced a topology that is not strongly connected")]
    InitFailure { algorithm: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StaticAlgorithm {
    Dlss,
    Drng,
    MaxPower,
}

impl StaticAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            StaticAlgorithm::Dlss => "dlss",
            StaticAlgorithm::Drng => "drng",
            StaticAlgorithm::MaxPower => "maxpower",
        }
    }

    pub fn run(self, net: &NetworkInstance) -> Result<StaticTopologyResult, BaselineError> {
        match self {
            StaticAlgorithm::Dlss => dlss(net),
            StaticAlgorithm::Drng => drng(net),
            StaticAlgorithm::MaxPower => Ok(max_power(net)),
        }
    }
}

impl fmt::Display for StaticAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticTopologyResult {
    pub assignment: PowerAssignment,
    /// Neighbors each node chose to keep.
    pub neighbors: Vec<BTreeSet<NodeId>>,
}

fn in_range(net: &NetworkInstance, u: NodeId, v: NodeId) -> bool {
    u != v && net.link_power(u, v) <= net.p_max()
}

fn finish(
    net: &NetworkInstance,
    neighbors: Vec<BTreeSet<NodeId>>,
    algorithm: &'static str,
) -> Result<StaticTopologyResult, BaselineError> {
    let power = net
        .ids()
        .map(|u| {
            neighbors[u.0]
                .iter()
                .map(|&v| net.link_power(u, v))
                .fold(0.0, PowerLevel::max)
        })
        .collect();
    let assignment = PowerAssignment::new(power);
    if !net.is_strongly_connected(&assignment) {
        return Err(BaselineError::InitFailure { algorithm });
    }
    Ok(StaticTopologyResult {
        assignment,
        neighbors,
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Local minimum spanning tree on each node's maximum-power neighborhood;
/// a node keeps the tree edges incident to itself.
pub fn dlss(net: &NetworkInstance) -> Result<StaticTopologyResult, BaselineError> {
    let neighbors = net
        .ids()
        .map(|i| {
            let mut local: Vec<NodeId> = net.neighbors(i);
            local.push(i);
            local.sort();
            let mut edges = Vec::new();
            for (a, &u) in local.iter().enumerate() {
                for &v in &local[a + 1..] {
                    if in_range(net, u, v) && in_range(net, v, u) {
                        edges.push((net.link_power(u, v), u, v));
                    }
                }
            }
            edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            let mut parent: Vec<usize> = (0..local.len()).collect();
            let slot = |x: NodeId| local.binary_search(&x).unwrap();
            let mut kept = BTreeSet::new();
            let mut joined = 1;
            for (_, u, v) in edges {
                if joined == local.len() {
                    break;
                }
                let (ru, rv) = (find(&mut parent, slot(u)), find(&mut parent, slot(v)));
                if ru == rv {
                    continue;
                }
                parent[ru] = rv;
                joined += 1;
                if u == i {
                    kept.insert(v);
                } else if v == i {
                    kept.insert(u);
                }
            }
            kept
        })
        .collect();
    finish(net, neighbors, "dlss")
}

/// Directed relative neighborhood graph: an edge is dropped when some
/// third node relays it with both hops strictly cheaper.
pub fn drng(net: &NetworkInstance) -> Result<StaticTopologyResult, BaselineError> {
    let neighbors = net
        .ids()
        .map(|u| {
            net.neighbors(u)
                .into_iter()
                .filter(|&v| {
                    let direct = net.link_power(u, v);
                    !net.ids().any(|w| {
                        w != u
                            && w != v
                            && in_range(net, u, w)
                            && in_range(net, w, v)
                            && net.link_power(u, w).max(net.link_power(w, v)) < direct
                    })
                })
                .collect()
        })
        .collect();
    finish(net, neighbors, "drng")
}

pub fn max_power(net: &NetworkInstance) -> StaticTopologyResult {
    StaticTopologyResult {
        assignment: net.max_power_assignment(),
        neighbors: net.ids().map(|i| net.neighbors(i).into_iter().collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::tests::{collinear, p, A, B, C};
    use crate::net::{Node, Position};
    use crate::radio::RadioParams;

    fn build(points: &[(f64, f64)], side: f64, p_max: f64) -> NetworkInstance {
        let nodes = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Node { id: NodeId(i), position: Position::new(x, y), energy: 1.0 })
            .collect();
        NetworkInstance::new(nodes, RadioParams::default(), p_max, side).unwrap()
    }

    #[test]
    fn collinear_dlss_and_drng() {
        let net = collinear();
        let expect = [p(&net, A, C), p(&net, C, B), p(&net, B, C)];
        let d = dlss(&net).unwrap();
        assert_eq!(d.assignment.as_slice(), &expect[..]);
        assert_eq!(d.neighbors[A.0], BTreeSet::from([C]));
        assert_eq!(drng(&net).unwrap().assignment.as_slice(), &expect[..]);
    }

    #[test]
    fn two_nodes_use_their_only_level() {
        let net = build(&[(0.0, 0.0), (30.0, 0.0)], 30.0, 1e-6);
        let only = net.link_power(NodeId(0), NodeId(1));
        for alg in [StaticAlgorithm::Dlss, StaticAlgorithm::Drng, StaticAlgorithm::MaxPower] {
            assert_eq!(alg.run(&net).unwrap().assignment.as_slice(), &[only, only]);
        }
    }

    #[test]
    fn equilateral_triangle_keeps_every_edge() {
        let h = 50.0 * 3f64.sqrt() / 2.0;
        let net = build(&[(0.0, 0.0), (50.0, 0.0), (25.0, h)], 50.0, 1e-6);
        let r = drng(&net).unwrap();
        assert!(r.neighbors.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn max_power_uses_menu_tops() {
        let net = collinear();
        let r = max_power(&net);
        for i in net.ids() {
            assert_eq!(r.assignment.get(i), net.menu(i).max());
        }
    }
}
