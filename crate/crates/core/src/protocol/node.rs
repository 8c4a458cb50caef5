use std::collections::{BTreeMap, BTreeSet};

use crate::game::{able_to_reduce_power, estimated_lifetime, GameError, LocalKnowledge, ReductionCheck};
use crate::net::{NodeId, PowerLevel, PowerMenu};

use super::ProtocolConfig;

/// What a node has cached about one neighbor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborEntry {
    pub power: Option<PowerLevel>,
    pub able: Option<bool>,
    pub energy: Option<f64>,
    /// The neighbor's in-range link powers, learned from its neighbor info.
    pub links: Option<BTreeMap<NodeId, PowerLevel>>,
}

impl NeighborEntry {
    /// Distinct link powers ascending: the neighbor's menu.
    pub fn menu(&self) -> Option<Vec<PowerLevel>> {
        let links = self.links.as_ref()?;
        let mut levels: Vec<PowerLevel> = links.values().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Some(levels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    pub power: PowerLevel,
    pub menu: PowerMenu,
    /// Own remaining energy.
    pub energy: f64,
    pub alive: bool,
    /// Own link powers to every node heard at maximum power.
    pub links: BTreeMap<NodeId, PowerLevel>,
    pub table: BTreeMap<NodeId, NeighborEntry>,
    /// `I_i`.
    pub reverse: BTreeSet<NodeId>,
    /// `S_i`.
    pub able: bool,
    /// `p'_i` from the last local evaluation.
    pub potential: PowerLevel,
    pub energy_shared: bool,
    /// NAPA executions this round.
    pub q: u32,
}

impl NodeState {
    pub fn new(id: NodeId, menu: PowerMenu, energy: f64) -> Self {
        let power = menu.max();
        Self {
            id,
            power,
            menu,
            energy,
            alive: true,
            links: BTreeMap::new(),
            table: BTreeMap::new(),
            reverse: BTreeSet::new(),
            able: false,
            potential: power,
            energy_shared: false,
            q: 0,
        }
    }

    /// `R_i` from the node's own link list.
    pub fn reachable_set(&self) -> BTreeSet<NodeId> {
        self.links
            .iter()
            .filter(|&(_, &l)| l <= self.power)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn entry(&mut self, j: NodeId) -> &mut NeighborEntry {
        self.table.entry(j).or_default()
    }

    /// Runs the local reduction rule and stores `S_i` and `p'_i`.
    pub fn recompute_able(&mut self) -> Result<ReductionCheck, GameError> {
        match able_to_reduce_power(self) {
            Ok(r) => {
                self.able = r.able;
                self.potential = r.potential_power;
                Ok(r)
            }
            Err(e) => {
                self.able = false;
                self.potential = self.power;
                Err(e)
            }
        }
    }

    /// Drops every trace of `dead` from the tables.
    pub fn forget(&mut self, dead: NodeId) {
        self.links.remove(&dead);
        self.table.remove(&dead);
        self.reverse.remove(&dead);
    }
}

impl LocalKnowledge for NodeState {
    fn id(&self) -> NodeId {
        self.id
    }

    fn power(&self) -> PowerLevel {
        self.power
    }

    fn energy(&self) -> f64 {
        self.energy
    }

    fn menu(&self) -> &PowerMenu {
        &self.menu
    }

    fn link(&self, x: NodeId) -> Option<PowerLevel> {
        self.links.get(&x).copied()
    }

    fn reachable(&self) -> Vec<NodeId> {
        self.reachable_set().into_iter().collect()
    }

    fn neighbor_power(&self, j: NodeId) -> Option<PowerLevel> {
        self.table.get(&j)?.power
    }

    fn neighbor_link(&self, j: NodeId, x: NodeId) -> Option<PowerLevel> {
        self.table.get(&j)?.links.as_ref()?.get(&x).copied()
    }

    fn neighbor_energy(&self, x: NodeId) -> Option<f64> {
        self.table.get(&x)?.energy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NapaDecision {
    /// `q` reached `Q` this round.
    Exhausted,
    /// Raise to cover `covered`, the node defining `target`'s power.
    Help {
        new_power: PowerLevel,
        target: NodeId,
        covered: NodeId,
    },
    Reduce { new_power: PowerLevel },
    Idle,
    /// A table entry needed by the rule is missing.
    Stale(String),
}

/// Estimated potential lifetime of reverse neighbor `j` from cached data:
/// one menu level below its power when it has flagged it can reduce.
fn estimate_potential(entry: &NeighborEntry) -> Option<(f64, PowerLevel, Vec<PowerLevel>)> {
    let p = entry.power?;
    let w = entry.energy?;
    let menu = entry.menu()?;
    let mut est = p;
    if entry.able == Some(true) {
        if let Some(k) = menu.iter().position(|&l| l == p) {
            if k > 0 {
                est = menu[k - 1];
            }
        }
    }
    Some((estimated_lifetime(w, est), p, menu))
}

/// One NAPA step from local state only. Pure: the caller applies the
/// decision and bumps `q`.
pub fn napa_decide(state: &NodeState, cfg: &ProtocolConfig) -> NapaDecision {
    if state.q >= cfg.q_max {
        return NapaDecision::Exhausted;
    }
    let mut best: Option<(NodeId, f64, PowerLevel, Vec<PowerLevel>)> = None;
    for &j in &state.reverse {
        let Some(entry) = state.table.get(&j) else {
            return NapaDecision::Stale(format!("reverse neighbor {j} has no entry"));
        };
        let Some((l, p, menu)) = estimate_potential(entry) else {
            return NapaDecision::Stale(format!("reverse neighbor {j} is missing power, energy or links"));
        };
        if best.as_ref().is_none_or(|b| l < b.1) {
            best = Some((j, l, p, menu));
        }
    }
    let own = match able_to_reduce_power(state) {
        Ok(r) => r,
        Err(e) => return NapaDecision::Stale(e.to_string()),
    };
    if let Some((m, l_m, p_m, menu_m)) = best {
        let entry = &state.table[&m];
        let covered = entry
            .links
            .as_ref()
            .and_then(|links| links.iter().find(|&(_, &l)| l == p_m).map(|(&x, _)| x));
        if entry.able != Some(true) && p_m > menu_m[0] {
            if let Some(c) = covered {
                if c != state.id {
                    if let Some(to_c) = state.links.get(&c).copied() {
                        if to_c > state.power && estimated_lifetime(state.energy, to_c) > l_m {
                            return NapaDecision::Help {
                                new_power: to_c,
                                target: m,
                                covered: c,
                            };
                        }
                    }
                }
            }
        }
    }
    if own.able {
        NapaDecision::Reduce {
            new_power: own.potential_power,
        }
    } else {
        NapaDecision::Idle
    }
}
