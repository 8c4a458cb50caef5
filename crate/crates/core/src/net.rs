//! Deployment geometry, link powers, power menus and directed reachability.
//!
//! A power level is a per-bit transmit energy in J/bit. The minimum power for
//! node `a` to reach node `b` is the transmit energy per bit at their
//! distance, so it is symmetric and strictly increasing in distance.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::graph;
use crate::radio::RadioParams;

/// Per-bit transmit energy, J/bit. `0.0` marks a dead (silent) node.
pub type PowerLevel = f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Position,
    /// Initial energy, J.
    pub energy: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("a network needs at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node ids must be 0..n-1 in order; found {found} at index {index}")]
    BadId { index: usize, found: NodeId },
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("node {0} has a non-finite position")]
    NonFinitePosition(NodeId),
    #[error("node {0} lies outside the deployment region")]
    OutOfRegion(NodeId),
    #[error("node {0} has an invalid initial energy")]
    BadEnergy(NodeId),
    #[error("node {0} has no neighbor within the maximum power")]
    EmptyMenu(NodeId),
    #[error("the graph at maximum power is not strongly connected")]
    Disconnected,
    #[error("invalid radio parameters: {0}")]
    Radio(#[from] crate::radio::RadioError),
    #[error("power {power} of node {node} is not in its menu")]
    NotInMenu { node: NodeId, power: f64 },
    #[error("assignment has {got} entries, expected {expected}")]
    AssignmentLength { got: usize, expected: usize },
    #[error("deployment file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Minimum per-bit transmit energy for `a` to reach `b`.
pub fn min_link_power(a: &Position, b: &Position, radio: &RadioParams) -> PowerLevel {
    radio.tx_per_bit(a.distance(b))
}

/// The distinct power levels a node may use, ascending.
///
/// Each level is the link power to at least one node within the maximum
/// power; `targets[k]` is the smallest-id node defining `levels[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMenu {
    levels: Vec<PowerLevel>,
    targets: Vec<NodeId>,
}

impl PowerMenu {
    /// Builds node `i`'s menu from link powers `links` (indexed by node id).
    pub fn from_links(i: NodeId, links: &[PowerLevel], p_max: PowerLevel) -> Result<Self, NetError> {
        let mut pairs: Vec<(PowerLevel, NodeId)> = links
            .iter()
            .enumerate()
            .filter(|&(j, &p)| j != i.0 && p <= p_max)
            .map(|(j, &p)| (p, NodeId(j)))
            .collect();
        if pairs.is_empty() {
            return Err(NetError::EmptyMenu(i));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        pairs.dedup_by(|later, first| later.0 == first.0);
        let (levels, targets) = pairs.into_iter().unzip();
        Ok(Self { levels, targets })
    }

    pub fn levels(&self) -> &[PowerLevel] {
        &self.levels
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> PowerLevel {
        self.levels[0]
    }

    pub fn max(&self) -> PowerLevel {
        self.levels[self.levels.len() - 1]
    }

    pub fn index_of(&self, p: PowerLevel) -> Option<usize> {
        self.levels.iter().position(|&l| l == p)
    }

    pub fn contains(&self, p: PowerLevel) -> bool {
        self.index_of(p).is_some()
    }

    /// The level immediately below `p`, if `p` is a level above the minimum.
    pub fn level_below(&self, p: PowerLevel) -> Option<PowerLevel> {
        match self.index_of(p) {
            Some(k) if k > 0 => Some(self.levels[k - 1]),
            _ => None,
        }
    }
}

/// The mapping node → current power level.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAssignment(Vec<PowerLevel>);

impl PowerAssignment {
    pub fn new(power: Vec<PowerLevel>) -> Self {
        Self(power)
    }

    pub fn get(&self, i: NodeId) -> PowerLevel {
        self.0[i.0]
    }

    pub fn set(&mut self, i: NodeId, p: PowerLevel) {
        self.0[i.0] = p;
    }

    /// `{i → p, P₋ᵢ}`: the same assignment with node `i` substituted.
    pub fn with(&self, i: NodeId, p: PowerLevel) -> Self {
        let mut out = self.clone();
        out.0[i.0] = p;
        out
    }

    pub fn as_slice(&self) -> &[PowerLevel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An immutable deployment: nodes, radio model, maximum power, link powers and menus.
#[derive(Debug, Clone)]
pub struct NetworkInstance {
    nodes: Vec<Node>,
    radio: RadioParams,
    p_max: PowerLevel,
    side: f64,
    link: Vec<PowerLevel>,
    menus: Vec<PowerMenu>,
}

impl NetworkInstance {
    /// Validates and builds an instance. Rejects instances whose graph at
    /// `p_max` is not strongly connected.
    pub fn new(nodes: Vec<Node>, radio: RadioParams, p_max: PowerLevel, side: f64) -> Result<Self, NetError> {
        radio.validate()?;
        let n = nodes.len();
        if n < 2 {
            return Err(NetError::TooFewNodes(n));
        }
        for (index, node) in nodes.iter().enumerate() {
            if node.id.0 != index {
                return Err(NetError::BadId { index, found: node.id });
            }
            if !node.position.is_finite() {
                return Err(NetError::NonFinitePosition(node.id));
            }
            let p = node.position;
            if p.x < 0.0 || p.y < 0.0 || p.x > side || p.y > side {
                return Err(NetError::OutOfRegion(node.id));
            }
            if !(node.energy.is_finite() && node.energy >= 0.0) {
                return Err(NetError::BadEnergy(node.id));
            }
        }
        let mut link = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    link[i * n + j] = min_link_power(&nodes[i].position, &nodes[j].position, &radio);
                }
            }
        }
        let menus = (0..n)
            .map(|i| PowerMenu::from_links(NodeId(i), &link[i * n..(i + 1) * n], p_max))
            .collect::<Result<Vec<_>, _>>()?;
        let net = Self {
            nodes,
            radio,
            p_max,
            side,
            link,
            menus,
        };
        if !net.is_strongly_connected(&net.max_power_assignment()) {
            return Err(NetError::Disconnected);
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n()).map(NodeId)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn position(&self, i: NodeId) -> Position {
        self.nodes[i.0].position
    }

    pub fn initial_energy(&self, i: NodeId) -> f64 {
        self.nodes[i.0].energy
    }

    pub fn initial_energies(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.energy).collect()
    }

    pub fn radio(&self) -> &RadioParams {
        &self.radio
    }

    pub fn p_max(&self) -> PowerLevel {
        self.p_max
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// `p(i, j)`; zero on the diagonal.
    pub fn link_power(&self, i: NodeId, j: NodeId) -> PowerLevel {
        self.link[i.0 * self.n() + j.0]
    }

    pub fn menu(&self, i: NodeId) -> &PowerMenu {
        &self.menus[i.0]
    }

    /// Nodes within `i`'s maximum power, ascending by id.
    pub fn neighbors(&self, i: NodeId) -> Vec<NodeId> {
        self.ids()
            .filter(|&j| j != i && self.link_power(i, j) <= self.p_max)
            .collect()
    }

    /// Every node at the top of its menu.
    pub fn max_power_assignment(&self) -> PowerAssignment {
        PowerAssignment(self.menus.iter().map(|m| m.max()).collect())
    }

    /// Checks shape and that every entry is a menu level or 0 (dead).
    pub fn validate_assignment(&self, p: &PowerAssignment) -> Result<(), NetError> {
        if p.len() != self.n() {
            return Err(NetError::AssignmentLength {
                got: p.len(),
                expected: self.n(),
            });
        }
        for i in self.ids() {
            let pi = p.get(i);
            if pi != 0.0 && !self.menu(i).contains(pi) {
                return Err(NetError::NotInMenu { node: i, power: pi });
            }
        }
        Ok(())
    }

    fn edge(&self, p: &[PowerLevel], i: usize, j: usize) -> bool {
        i != j && self.link[i * self.n() + j] <= p[i]
    }

    /// `R_i`: nodes `i` reaches at its assigned power.
    pub fn reachable_set(&self, p: &PowerAssignment, i: NodeId) -> BTreeSet<NodeId> {
        self.ids().filter(|&j| self.edge(p.as_slice(), i.0, j.0)).collect()
    }

    /// `I_i`: nodes whose assigned power reaches `i`.
    pub fn reverse_link_set(&self, p: &PowerAssignment, i: NodeId) -> BTreeSet<NodeId> {
        self.ids().filter(|&j| self.edge(p.as_slice(), j.0, i.0)).collect()
    }

    /// `C(P)`: the directed graph induced by `p` is strongly connected.
    /// A node at power 0 is dead and disconnects the graph.
    pub fn is_strongly_connected(&self, p: &PowerAssignment) -> bool {
        let n = self.n();
        if n == 1 {
            return true;
        }
        if p.as_slice().iter().any(|&x| x <= 0.0) {
            return false;
        }
        graph::strongly_connected(n, &vec![true; n], |u, v| self.edge(p.as_slice(), u, v))
    }

    /// Strong connectivity of the subgraph induced by the `alive` nodes.
    pub fn is_strongly_connected_among(&self, p: &PowerAssignment, alive: &[bool]) -> bool {
        graph::strongly_connected(self.n(), alive, |u, v| self.edge(p.as_slice(), u, v))
    }

    /// `c_i(a, P)`: under `{i → a, P₋ᵢ}` a directed path leads from `i` to
    /// every member of `i`'s reachable set at its current power.
    pub fn local_connectivity(&self, i: NodeId, a: PowerLevel, p: &PowerAssignment) -> bool {
        let targets = self.reachable_set(p, i);
        let dev = p.with(i, a);
        let n = self.n();
        let seen = graph::reach(n, i.0, &vec![true; n], false, &|u, v| self.edge(dev.as_slice(), u, v));
        targets.iter().all(|j| seen[j.0])
    }

    /// Serializes to the deployment text format.
    pub fn to_deployment_text(&self, seed: u64) -> String {
        let mut out = format!("# {} {} {}\n", self.side, self.n(), seed);
        for node in &self.nodes {
            out.push_str(&format!(
                "{} {} {} {}\n",
                node.id, node.position.x, node.position.y, node.energy
            ));
        }
        out
    }

    /// Parses the deployment text format: a header `# side_m n seed` then one
    /// `id x_m y_m energy_J` line per node. Returns the instance and the seed.
    pub fn from_deployment_text(
        text: &str,
        radio: RadioParams,
        p_max: PowerLevel,
    ) -> Result<(Self, u64), NetError> {
        let parse_err = |line: usize, reason: &str| NetError::Parse {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let fields: Vec<&str> = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| parse_err(hl + 1, "header must start with '#'"))?
            .split_whitespace()
            .collect();
        if fields.len() != 3 {
            return Err(parse_err(hl + 1, "header must be `# side_m n seed`"));
        }
        let side: f64 = fields[0].parse().map_err(|_| parse_err(hl + 1, "bad side"))?;
        let n: usize = fields[1].parse().map_err(|_| parse_err(hl + 1, "bad n"))?;
        let seed: u64 = fields[2].parse().map_err(|_| parse_err(hl + 1, "bad seed"))?;

        let mut slots: Vec<Option<Node>> = vec![None; n];
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(parse_err(ln + 1, "expected `id x_m y_m energy_J`"));
            }
            let id: usize = f[0].parse().map_err(|_| parse_err(ln + 1, "bad id"))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(ln + 1, "bad number"));
            let node = Node {
                id: NodeId(id),
                position: Position::new(num(f[1])?, num(f[2])?),
                energy: num(f[3])?,
            };
            if id >= n {
                return Err(parse_err(ln + 1, "id out of range"));
            }
            if slots[id].is_some() {
                return Err(NetError::DuplicateId(NodeId(id)));
            }
            slots[id] = Some(node);
        }
        let nodes = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| parse_err(0, &format!("node {i} missing"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Self::new(nodes, radio, p_max, side)?, seed))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const NJ: f64 = 1e-9;

    /// Three collinear nodes A, C, B at x = 0, 40, 110 m (ids 0, 1, 2).
    pub(crate) fn collinear() -> NetworkInstance {
        let nodes = [0.0, 40.0, 110.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| Node {
                id: NodeId(i),
                position: Position::new(x, 0.0),
                energy: 40e3,
            })
            .collect();
        NetworkInstance::new(nodes, RadioParams::default(), 250.0 * NJ, 110.0).unwrap()
    }

    pub(crate) const A: NodeId = NodeId(0);
    pub(crate) const C: NodeId = NodeId(1);
    pub(crate) const B: NodeId = NodeId(2);

    pub(crate) fn p(net: &NetworkInstance, a: NodeId, b: NodeId) -> f64 {
        net.link_power(a, b)
    }

    /// The assignment where A covers B directly and C only reaches A.
    pub(crate) fn stuck(net: &NetworkInstance) -> PowerAssignment {
        PowerAssignment::new(vec![p(net, A, B), p(net, C, A), p(net, B, C)])
    }

    /// The assignment after C raised to cover B.
    pub(crate) fn helped(net: &NetworkInstance) -> PowerAssignment {
        PowerAssignment::new(vec![p(net, A, B), p(net, C, B), p(net, B, C)])
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        ((a - b) / b).abs() < tol
    }

    #[test]
    fn link_power_point_values() {
        let r = RadioParams::default();
        let o = Position::new(0.0, 0.0);
        assert!(close(min_link_power(&o, &Position::new(50.0, 0.0), &r), 75.0 * NJ, 1e-15));
        assert!(close(min_link_power(&o, &Position::new(100.0, 0.0), &r), 180.0 * NJ, 1e-15));
        assert!(close(min_link_power(&o, &o, &r), 50.0 * NJ, 1e-15));
        let a = Position::new(3.0, 7.0);
        let b = Position::new(91.5, 40.25);
        assert_eq!(min_link_power(&a, &b, &r), min_link_power(&b, &a, &r));
    }

    #[test]
    fn collinear_menu() {
        let net = collinear();
        let m = net.menu(A);
        assert_eq!(m.len(), 2);
        assert!(close(m.levels()[0], 66.0 * NJ, 1e-12));
        assert!(close(m.levels()[1], 240.333 * NJ, 1e-5));
        assert_eq!(m.targets(), &[C, B]);
    }

    #[test]
    fn menu_excludes_nodes_beyond_max_power() {
        let nodes = [0.0, 40.0, 110.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| Node {
                id: NodeId(i),
                position: Position::new(x, 0.0),
                energy: 1.0,
            })
            .collect();
        let net = NetworkInstance::new(nodes, RadioParams::default(), 100.0 * NJ, 110.0).unwrap();
        assert_eq!(net.menu(A).len(), 1);
        assert_eq!(net.menu(C).len(), 2);
    }

    #[test]
    fn two_node_menus_have_one_level() {
        let nodes = vec![
            Node { id: NodeId(0), position: Position::new(0.0, 0.0), energy: 1.0 },
            Node { id: NodeId(1), position: Position::new(30.0, 40.0), energy: 1.0 },
        ];
        let net = NetworkInstance::new(nodes, RadioParams::default(), 1e-6, 100.0).unwrap();
        assert_eq!(net.menu(NodeId(0)).len(), 1);
        assert_eq!(net.menu(NodeId(1)).len(), 1);
    }

    #[test]
    fn equidistant_neighbors_share_a_level() {
        let nodes = vec![
            Node { id: NodeId(0), position: Position::new(50.0, 50.0), energy: 1.0 },
            Node { id: NodeId(1), position: Position::new(90.0, 50.0), energy: 1.0 },
            Node { id: NodeId(2), position: Position::new(10.0, 50.0), energy: 1.0 },
        ];
        let net = NetworkInstance::new(nodes, RadioParams::default(), 1e-6, 100.0).unwrap();
        let m = net.menu(NodeId(0));
        assert_eq!(m.len(), 1);
        assert_eq!(m.targets(), &[NodeId(1)]);
    }

    #[test]
    fn empty_menu_and_disconnected_rejected() {
        let mk = |xs: &[f64], p_max: f64| {
            let nodes = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| Node { id: NodeId(i), position: Position::new(x, 0.0), energy: 1.0 })
                .collect();
            NetworkInstance::new(nodes, RadioParams::default(), p_max, 1000.0)
        };
        assert_eq!(mk(&[0.0, 500.0], 100.0 * NJ).unwrap_err(), NetError::EmptyMenu(NodeId(0)));
        assert_eq!(
            mk(&[0.0, 10.0, 500.0, 510.0], 100.0 * NJ).unwrap_err(),
            NetError::Disconnected
        );
        assert_eq!(mk(&[0.0], 1.0).unwrap_err(), NetError::TooFewNodes(1));
        assert_eq!(mk(&[0.0, 2000.0], 1.0).unwrap_err(), NetError::OutOfRegion(NodeId(1)));
    }

    #[test]
    fn reachable_and_reverse_sets() {
        let net = collinear();
        let s = stuck(&net);
        assert_eq!(net.reachable_set(&s, A), BTreeSet::from([C, B]));
        assert_eq!(net.reverse_link_set(&s, C), BTreeSet::from([A, B]));
        let dead = s.with(A, 0.0);
        assert!(net.reachable_set(&dead, A).is_empty());
        let max = net.max_power_assignment();
        assert_eq!(net.reachable_set(&max, A), BTreeSet::from([C, B]));
        for i in net.ids() {
            assert_eq!(net.reachable_set(&max, i), net.reverse_link_set(&max, i));
        }
    }

    #[test]
    fn unreached_node_has_empty_reverse_set() {
        let net = collinear();
        // nobody reaches B
        let pa = PowerAssignment::new(vec![p(&net, A, C), p(&net, C, A), p(&net, B, C)]);
        assert!(net.reverse_link_set(&pa, B).is_empty());
        assert!(!net.is_strongly_connected(&pa));
    }

    #[test]
    fn strong_connectivity_cases() {
        let net = collinear();
        let s = stuck(&net);
        assert!(net.is_strongly_connected(&s));
        // A lowered to 66 before C raises: B is unreachable
        assert!(!net.is_strongly_connected(&s.with(A, p(&net, A, C))));
        assert!(!net.is_strongly_connected(&s.with(C, 0.0)));
    }

    #[test]
    fn local_connectivity_cases() {
        let net = collinear();
        let s = stuck(&net);
        let low = p(&net, A, C);
        assert!(!net.local_connectivity(A, low, &s));
        assert!(net.local_connectivity(A, low, &helped(&net)));
        assert!(net.local_connectivity(A, s.get(A), &s));
    }

    #[test]
    fn assignment_validation() {
        let net = collinear();
        assert!(net.validate_assignment(&stuck(&net)).is_ok());
        assert!(net.validate_assignment(&stuck(&net).with(B, 0.0)).is_ok());
        assert!(matches!(
            net.validate_assignment(&stuck(&net).with(B, 1.0)),
            Err(NetError::NotInMenu { .. })
        ));
    }

    #[test]
    fn deployment_text_roundtrip_and_rejections() {
        let net = collinear();
        let text = net.to_deployment_text(7);
        let (back, seed) = NetworkInstance::from_deployment_text(&text, *net.radio(), net.p_max()).unwrap();
        assert_eq!(seed, 7);
        assert_eq!(back.nodes(), net.nodes());

        let dup = "# 110 3 1\n0 0 0 1\n0 40 0 1\n2 110 0 1\n";
        assert_eq!(
            NetworkInstance::from_deployment_text(dup, RadioParams::default(), 1e-6).unwrap_err(),
            NetError::DuplicateId(NodeId(0))
        );
        let outside = "# 110 3 1\n0 0 0 1\n1 40 0 1\n2 111 0 1\n";
        assert_eq!(
            NetworkInstance::from_deployment_text(outside, RadioParams::default(), 1e-6).unwrap_err(),
            NetError::OutOfRegion(NodeId(2))
        );
    }
}
