//! The topology-control game: lifetimes, potential powers, the utility
//! function and the ordinal potential function.
//!
//! Everything on [`GameView`] uses global knowledge of the assignment and is
//! the reference the protocol and the tests are checked against. The local,
//! message-fed approximation of a node's potential power lives in
//! [`able_to_reduce_power`].

use std::collections::BTreeSet;

use thiserror::Error;

use crate::net::{NetworkInstance, NodeId, PowerAssignment, PowerLevel, PowerMenu};

/// Lifetime in bits: joules divided by joules-per-bit.
pub type Lifetime = f64;

/// Relative tolerance for lifetime comparisons.
pub const REL_TOL: f64 = 1e-12;
/// Deltas below this many bits count as zero in sign tests.
pub const ZERO_BAND: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("node {0} has no reverse-link neighbors")]
    EmptyReverseNeighborhood(NodeId),
    #[error("node {node}: neighbor table cannot resolve {what}")]
    StaleNeighborTable { node: NodeId, what: String },
    #[error("view is inconsistent with the network: {0}")]
    Inconsistent(String),
}

/// `L = W / p`; infinite at zero power with energy left, zero without energy.
pub fn estimated_lifetime(energy: f64, power: PowerLevel) -> Lifetime {
    if energy <= 0.0 {
        0.0
    } else if power <= 0.0 {
        f64::INFINITY
    } else {
        energy / power
    }
}

pub fn approx_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_infinite() || b.is_infinite() {
        return false;
    }
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

/// `a > b` beyond the relative tolerance.
pub fn definitely_greater(a: f64, b: f64) -> bool {
    a > b && !approx_eq(a, b)
}

fn sign(x: f64, scale: f64) -> i8 {
    if x.abs() < ZERO_BAND || x.abs() <= REL_TOL * scale {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// How the secondary-goal indicator `ℓ` is evaluated. `Negated` flips it and
/// exists only to check that the sign checker notices a broken utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EllRule {
    #[default]
    Standard,
    Negated,
}

/// Outcome of comparing one unilateral swap's utility and potential deltas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignVerdict {
    Consistent,
    BothZero,
    /// Signs differ. `opposed` is set when both deltas are nonzero.
    Violated { opposed: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignCheck {
    pub delta_u: f64,
    pub delta_phi: f64,
    pub verdict: SignVerdict,
}

/// One assignment with its node energies over a fixed network.
#[derive(Debug, Clone)]
pub struct GameView<'a> {
    net: &'a NetworkInstance,
    assignment: PowerAssignment,
    energies: Vec<f64>,
}

impl<'a> GameView<'a> {
    pub fn new(
        net: &'a NetworkInstance,
        assignment: PowerAssignment,
        energies: Vec<f64>,
    ) -> Result<Self, GameError> {
        net.validate_assignment(&assignment)
            .map_err(|e| GameError::Inconsistent(e.to_string()))?;
        if energies.len() != net.n() {
            return Err(GameError::Inconsistent(format!(
                "{} energies for {} nodes",
                energies.len(),
                net.n()
            )));
        }
        Ok(Self {
            net,
            assignment,
            energies,
        })
    }

    /// View at the nodes' initial energies.
    pub fn at_initial_energy(net: &'a NetworkInstance, assignment: PowerAssignment) -> Result<Self, GameError> {
        let energies = net.initial_energies();
        Self::new(net, assignment, energies)
    }

    pub fn net(&self) -> &NetworkInstance {
        self.net
    }

    pub fn assignment(&self) -> &PowerAssignment {
        &self.assignment
    }

    pub fn energy(&self, i: NodeId) -> f64 {
        self.energies[i.0]
    }

    /// The same view with node `i` substituted to `a`.
    pub fn deviate(&self, i: NodeId, a: PowerLevel) -> GameView<'a> {
        GameView {
            net: self.net,
            assignment: self.assignment.with(i, a),
            energies: self.energies.clone(),
        }
    }

    pub fn is_connected(&self) -> bool {
        self.net.is_strongly_connected(&self.assignment)
    }

    pub fn estimated_lifetime(&self, i: NodeId) -> Lifetime {
        estimated_lifetime(self.energy(i), self.assignment.get(i))
    }

    /// `p'_i`: the smallest menu level keeping the graph strongly connected
    /// with all other powers fixed. Falls back to the current power when no
    /// level connects the graph.
    pub fn potential_power(&self, i: NodeId) -> PowerLevel {
        let current = self.assignment.get(i);
        let mut trial = self.assignment.clone();
        for &a in self.net.menu(i).levels() {
            if a > current {
                break;
            }
            trial.set(i, a);
            if self.net.is_strongly_connected(&trial) {
                return a;
            }
        }
        current
    }

    /// `L'_i = W_i / p'_i`.
    pub fn potential_lifetime(&self, i: NodeId) -> Lifetime {
        estimated_lifetime(self.energy(i), self.potential_power(i))
    }

    pub fn reverse_link_set(&self, i: NodeId) -> BTreeSet<NodeId> {
        self.net.reverse_link_set(&self.assignment, i)
    }

    /// `m(i)`: reverse-link neighbor with the smallest potential lifetime,
    /// ties to the smaller id.
    pub fn min_reverse_neighbor(&self, i: NodeId) -> Result<NodeId, GameError> {
        self.min_reverse_neighbor_with(i).map(|(m, _)| m)
    }

    fn min_reverse_neighbor_with(&self, i: NodeId) -> Result<(NodeId, Lifetime), GameError> {
        let mut best: Option<(NodeId, Lifetime)> = None;
        for j in self.reverse_link_set(i) {
            let l = self.potential_lifetime(j);
            best = match best {
                Some((_, bl)) if !(l < bl && !approx_eq(l, bl)) => best,
                _ => Some((j, l)),
            };
        }
        best.ok_or(GameError::EmptyReverseNeighborhood(i))
    }

    /// `K_i`: menu levels at which `i` raises `m(i)`'s potential lifetime
    /// above its current value while its own lifetime stays strictly above
    /// that current value.
    pub fn preferred_powers(&self, i: NodeId) -> Vec<PowerLevel> {
        let Ok((m, previous)) = self.min_reverse_neighbor_with(i) else {
            return Vec::new();
        };
        self.net
            .menu(i)
            .levels()
            .iter()
            .copied()
            .filter(|&a| {
                let helped = self.deviate(i, a).potential_lifetime(m);
                definitely_greater(helped, previous)
                    && definitely_greater(estimated_lifetime(self.energy(i), a), previous)
            })
            .collect()
    }

    /// `u_i(a)` with the standard `ℓ`.
    pub fn utility(&self, i: NodeId, a: PowerLevel) -> f64 {
        self.utility_with(i, a, EllRule::Standard)
    }

    pub fn utility_with(&self, i: NodeId, a: PowerLevel, rule: EllRule) -> f64 {
        let preferred = self.preferred_powers(i);
        self.utility_given(i, a, &preferred, rule)
    }

    fn utility_given(&self, i: NodeId, a: PowerLevel, preferred: &[PowerLevel], rule: EllRule) -> f64 {
        if !self.net.local_connectivity(i, a, &self.assignment) {
            return 0.0;
        }
        let own = estimated_lifetime(self.energy(i), a);
        let dev = self.deviate(i, a);
        let neighborhood = self
            .reverse_link_set(i)
            .into_iter()
            .map(|j| dev.potential_lifetime(j))
            .fold(f64::INFINITY, f64::min);
        let primary = neighborhood.min(own);
        let mut ell = preferred.is_empty() || preferred.contains(&a);
        if rule == EllRule::Negated {
            ell = !ell;
        }
        if ell {
            primary + own
        } else {
            primary
        }
    }

    /// `Φ(P) = C(P) · min_i L'_i`.
    pub fn potential_value(&self) -> f64 {
        if !self.is_connected() {
            return 0.0;
        }
        self.net
            .ids()
            .map(|i| self.potential_lifetime(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Compares `u_i(a) − u_i(a')` with `Φ(i→a) − Φ(i→a')`.
    pub fn sign_consistency(&self, i: NodeId, a: PowerLevel, a_prime: PowerLevel) -> SignCheck {
        self.sign_consistency_with(i, a, a_prime, EllRule::Standard)
    }

    pub fn sign_consistency_with(
        &self,
        i: NodeId,
        a: PowerLevel,
        a_prime: PowerLevel,
        rule: EllRule,
    ) -> SignCheck {
        let preferred = self.preferred_powers(i);
        let u = self.utility_given(i, a, &preferred, rule);
        let u_prime = self.utility_given(i, a_prime, &preferred, rule);
        let phi = self.deviate(i, a).potential_value();
        let phi_prime = self.deviate(i, a_prime).potential_value();
        let delta_u = u - u_prime;
        let delta_phi = phi - phi_prime;
        let su = sign(delta_u, u.abs().max(u_prime.abs()));
        let sp = sign(delta_phi, phi.abs().max(phi_prime.abs()));
        let verdict = match (su, sp) {
            (0, 0) => SignVerdict::BothZero,
            (x, y) if x == y => SignVerdict::Consistent,
            (x, y) => SignVerdict::Violated {
                opposed: x != 0 && y != 0,
            },
        };
        SignCheck {
            delta_u,
            delta_phi,
            verdict,
        }
    }
}

/// What a node knows locally: its own state plus cached neighbor tables.
pub trait LocalKnowledge {
    fn id(&self) -> NodeId;
    fn power(&self) -> PowerLevel;
    fn energy(&self) -> f64;
    fn menu(&self) -> &PowerMenu;
    /// `p(i, x)` for `x` within `i`'s maximum power.
    fn link(&self, x: NodeId) -> Option<PowerLevel>;
    /// Current reachable neighbors, ascending by id.
    fn reachable(&self) -> Vec<NodeId>;
    fn neighbor_power(&self, j: NodeId) -> Option<PowerLevel>;
    /// `p(j, x)` as learned from `j`'s neighbor information.
    fn neighbor_link(&self, j: NodeId, x: NodeId) -> Option<PowerLevel>;
    fn neighbor_energy(&self, x: NodeId) -> Option<f64>;
}

/// Result of the local power-reduction rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionCheck {
    /// `S_i`.
    pub able: bool,
    /// `p'_i`: one menu level down when `able`, else the current power.
    pub potential_power: PowerLevel,
    /// `N_c(i)`: the node defining the current power.
    pub defining: NodeId,
    /// The reachable neighbor that covers `N_c(i)`, when one exists.
    pub witness: Option<NodeId>,
}

/// The local reduction rule: a node may drop one menu level if some
/// reachable neighbor that stays reachable after the drop already covers
/// the node defining its current power, and the node's own lifetime is
/// below `W_c / p(c, j)`.
pub fn able_to_reduce_power(k: &impl LocalKnowledge) -> Result<ReductionCheck, GameError> {
    let me = k.id();
    let p = k.power();
    let stale = |what: String| GameError::StaleNeighborTable { node: me, what };
    let level = k
        .menu()
        .index_of(p)
        .ok_or_else(|| stale(format!("current power {p} is not a menu level")))?;
    let reachable = k.reachable();
    let defining: Vec<NodeId> = reachable
        .iter()
        .copied()
        .filter(|&x| k.link(x) == Some(p))
        .collect();
    let Some(&c) = defining.first() else {
        return Err(stale("the node defining the current power".into()));
    };
    if defining.len() > 1 {
        log::debug!("node {me}: {} nodes define power {p}; using {c}", defining.len());
    }
    let mut out = ReductionCheck {
        able: false,
        potential_power: p,
        defining: c,
        witness: None,
    };
    if level == 0 {
        return Ok(out);
    }
    let own = estimated_lifetime(k.energy(), p);
    for j in reachable {
        if j == c || k.link(j).is_none_or(|l| l >= p) {
            continue;
        }
        let (Some(pj), Some(pjc)) = (k.neighbor_power(j), k.neighbor_link(j, c)) else {
            continue;
        };
        if pjc > pj {
            continue;
        }
        let Some(wc) = k.neighbor_energy(c) else {
            log::debug!("node {me}: energy of {c} unknown");
            continue;
        };
        if own < wc / pjc {
            out.able = true;
            out.potential_power = k.menu().levels()[level - 1];
            out.witness = Some(j);
            break;
        }
    }
    Ok(out)
}

/// [`LocalKnowledge`] backed by exact global state, for checking the local rule.
pub struct GlobalKnowledge<'v, 'a> {
    view: &'v GameView<'a>,
    node: NodeId,
}

impl<'v, 'a> GlobalKnowledge<'v, 'a> {
    pub fn new(view: &'v GameView<'a>, node: NodeId) -> Self {
        Self { view, node }
    }

    fn in_range(&self, x: NodeId) -> bool {
        x != self.node && self.view.net.link_power(self.node, x) <= self.view.net.p_max()
    }
}

impl LocalKnowledge for GlobalKnowledge<'_, '_> {
    fn id(&self) -> NodeId {
        self.node
    }

    fn power(&self) -> PowerLevel {
        self.view.assignment.get(self.node)
    }

    fn energy(&self) -> f64 {
        self.view.energy(self.node)
    }

    fn menu(&self) -> &PowerMenu {
        self.view.net.menu(self.node)
    }

    fn link(&self, x: NodeId) -> Option<PowerLevel> {
        self.in_range(x).then(|| self.view.net.link_power(self.node, x))
    }

    fn reachable(&self) -> Vec<NodeId> {
        self.view
            .net
            .reachable_set(&self.view.assignment, self.node)
            .into_iter()
            .collect()
    }

    fn neighbor_power(&self, j: NodeId) -> Option<PowerLevel> {
        self.in_range(j).then(|| self.view.assignment.get(j))
    }

    fn neighbor_link(&self, j: NodeId, x: NodeId) -> Option<PowerLevel> {
        let net = self.view.net;
        (self.in_range(j) && j != x && net.link_power(j, x) <= net.p_max()).then(|| net.link_power(j, x))
    }

    fn neighbor_energy(&self, x: NodeId) -> Option<f64> {
        self.in_range(x).then(|| self.view.energy(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::tests::{collinear, helped, p, stuck, A, B, C, NJ};

    const W: f64 = 40e3;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        ((a - b) / b).abs() < tol
    }

    #[test]
    fn estimated_lifetime_values() {
        assert!(close(estimated_lifetime(40e3, 180.0 * NJ), 2.2222222222222e11, 1e-12));
        assert_eq!(estimated_lifetime(0.0, 180.0 * NJ), 0.0);
        assert_eq!(estimated_lifetime(1.0, 0.0), f64::INFINITY);
        assert_eq!(estimated_lifetime(3.0, 0.5) * 2.0, estimated_lifetime(3.0, 0.25));
    }

    #[test]
    fn potential_power_on_collinear_instance() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        assert_eq!(v.potential_power(A), p(&net, A, B));
        assert_eq!(v.potential_power(C), p(&net, C, A));

        let v = GameView::at_initial_energy(&net, helped(&net)).unwrap();
        assert_eq!(v.potential_power(A), p(&net, A, C));
        assert!(close(v.potential_lifetime(A), W / (66.0 * NJ), 1e-12));
        assert!(close(v.potential_lifetime(A), 6.0606e11, 1e-4));
    }

    #[test]
    fn potential_lifetime_scales_with_energy() {
        let net = collinear();
        let v = GameView::new(&net, helped(&net), vec![2.0 * W, W, W]).unwrap();
        assert_eq!(v.potential_power(A), p(&net, A, C));
        assert!(close(v.potential_lifetime(A), 2.0 * W / p(&net, A, C), 1e-15));
    }

    #[test]
    fn min_reverse_neighbor_cases() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        assert_eq!(v.min_reverse_neighbor(C), Ok(A));
        // A's only reverse neighbor is C
        assert_eq!(v.min_reverse_neighbor(A), Ok(C));
        // nobody reaches B when A is at its minimum
        let lone = stuck(&net).with(A, p(&net, A, C));
        let v = GameView::at_initial_energy(&net, lone).unwrap();
        assert_eq!(v.min_reverse_neighbor(B), Err(GameError::EmptyReverseNeighborhood(B)));
    }

    #[test]
    fn min_reverse_neighbor_ties_go_to_smaller_id() {
        // B at x=80 is equidistant from C (x=40) and a node at x=120
        use crate::net::{Node, Position};
        use crate::radio::RadioParams;
        let nodes = [0.0, 40.0, 80.0, 120.0]
            .iter()
            .enumerate()
            .map(|(i, &x)| Node { id: NodeId(i), position: Position::new(x, 0.0), energy: 1.0 })
            .collect();
        let net = NetworkInstance::new(nodes, RadioParams::default(), 1e-6, 120.0).unwrap();
        let step = net.link_power(NodeId(0), NodeId(1));
        let pa = PowerAssignment::new(vec![step; 4]);
        let v = GameView::at_initial_energy(&net, pa).unwrap();
        assert_eq!(v.min_reverse_neighbor(NodeId(2)), Ok(NodeId(1)));
    }

    #[test]
    fn preferred_powers_on_collinear_instance() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        assert_eq!(v.preferred_powers(C), vec![p(&net, C, B)]);
        // reverse neighbors all at their minimum: no help possible
        let v = GameView::at_initial_energy(&net, helped(&net).with(A, p(&net, A, C))).unwrap();
        assert!(v.preferred_powers(A).is_empty());
    }

    #[test]
    fn utility_values() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        let l_a_stuck = W / p(&net, A, B);
        let l_c_high = W / p(&net, C, B);
        assert!(close(l_a_stuck, 1.664e11, 1e-3));
        assert!(close(v.utility(C, p(&net, C, A)), l_a_stuck, 1e-12));
        assert!(close(v.utility(C, p(&net, C, B)), 2.0 * l_c_high, 1e-12));
        assert!(close(v.utility(C, p(&net, C, B)), 8.0808e11, 1e-4));
        // lowering A cuts it off from B
        assert_eq!(v.utility(A, p(&net, A, C)), 0.0);
    }

    #[test]
    fn potential_value_values() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        assert!(close(v.potential_value(), W / p(&net, A, B), 1e-12));
        let v = GameView::at_initial_energy(&net, helped(&net)).unwrap();
        assert!(close(v.potential_value(), W / p(&net, C, B), 1e-12));
        assert!(close(v.potential_value(), 4.0404e11, 1e-4));
        let cut = stuck(&net).with(A, p(&net, A, C));
        assert_eq!(GameView::at_initial_energy(&net, cut).unwrap().potential_value(), 0.0);
    }

    #[test]
    fn raise_to_help_is_sign_consistent() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        let check = v.sign_consistency(C, p(&net, C, B), p(&net, C, A));
        assert!(check.delta_u > 0.0 && check.delta_phi > 0.0);
        assert_eq!(check.verdict, SignVerdict::Consistent);
        let same = v.sign_consistency(C, p(&net, C, A), p(&net, C, A));
        assert_eq!(same.verdict, SignVerdict::BothZero);
    }

    #[test]
    fn local_rule_on_collinear_instance() {
        let net = collinear();
        let v = GameView::at_initial_energy(&net, helped(&net)).unwrap();
        let r = able_to_reduce_power(&GlobalKnowledge::new(&v, A)).unwrap();
        assert!(r.able);
        assert_eq!(r.potential_power, p(&net, A, C));
        assert_eq!(r.defining, B);
        assert_eq!(r.witness, Some(C));

        let v = GameView::at_initial_energy(&net, stuck(&net)).unwrap();
        let r = able_to_reduce_power(&GlobalKnowledge::new(&v, A)).unwrap();
        assert!(!r.able);
        assert_eq!(r.potential_power, p(&net, A, B));
        // C sits at its minimum
        let r = able_to_reduce_power(&GlobalKnowledge::new(&v, C)).unwrap();
        assert_eq!((r.able, r.potential_power), (false, p(&net, C, A)));
    }

    #[test]
    fn local_rule_reports_unresolvable_power() {
        let net = collinear();
        let mut pa = stuck(&net);
        pa.set(A, 123.0 * NJ);
        let v = GameView { net: &net, assignment: pa, energies: vec![W; 3] };
        assert!(matches!(
            able_to_reduce_power(&GlobalKnowledge::new(&v, A)),
            Err(GameError::StaleNeighborTable { .. })
        ));
    }
}
