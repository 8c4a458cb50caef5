//! First-order radio energy model and per-node energy bookkeeping.
//!
//! Transmitting `k` bits over distance `d` costs `E_elec·k + ε_fs·d²·k` below
//! the crossover distance `d0` and `E_elec·k + ε_mp·d⁴·k` at or beyond it.
//! Receiving costs `E_elec·k`.

use thiserror::Error;

use crate::net::NodeId;

/// Parameters of the two-branch amplifier model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Electronics energy, J/bit.
    pub e_elec: f64,
    /// Free-space amplifier coefficient, J/bit/m².
    pub eps_fs: f64,
    /// Multipath amplifier coefficient, J/bit/m⁴.
    pub eps_mp: f64,
    /// Crossover distance, m.
    pub d0: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            eps_fs: 10e-12,
            eps_mp: 0.0013e-12,
            d0: 87.8,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("radio parameter `{0}` must be finite and positive")]
    NonPositive(&'static str),
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        for (name, v) in [
            ("e_elec", self.e_elec),
            ("eps_fs", self.eps_fs),
            ("eps_mp", self.eps_mp),
            ("d0", self.d0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RadioError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Amplifier energy per bit for distance `d`.
    pub fn amplifier_per_bit(&self, d: f64) -> f64 {
        if d < self.d0 {
            self.eps_fs * d * d
        } else {
            let d2 = d * d;
            self.eps_mp * d2 * d2
        }
    }

    /// Transmit energy per bit (J/bit) for distance `d`, electronics included.
    pub fn tx_per_bit(&self, d: f64) -> f64 {
        self.e_elec + self.amplifier_per_bit(d)
    }

    /// Energy (J) to transmit `bits` over distance `d`.
    pub fn tx_energy(&self, d: f64, bits: u64) -> f64 {
        let k = bits as f64;
        self.e_elec * k + self.amplifier_per_bit(d) * k
    }

    /// Energy (J) to receive `bits`.
    pub fn rx_energy(&self, bits: u64) -> f64 {
        self.e_elec * bits as f64
    }

    /// Radius (m) reached by a per-bit transmit energy `p` (inverse of [`Self::tx_per_bit`]).
    pub fn radius_for(&self, p: f64) -> f64 {
        let amp = (p - self.e_elec).max(0.0);
        let fs = (amp / self.eps_fs).sqrt();
        if fs < self.d0 {
            fs
        } else {
            (amp / self.eps_mp).sqrt().sqrt()
        }
    }
}

/// What a ledger debit pays for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyCategory {
    TxData,
    RxData,
    TxControl,
    RxControl,
}

impl EnergyCategory {
    pub const ALL: [EnergyCategory; 4] = [
        EnergyCategory::TxData,
        EnergyCategory::RxData,
        EnergyCategory::TxControl,
        EnergyCategory::RxControl,
    ];

    fn slot(self) -> usize {
        match self {
            EnergyCategory::TxData => 0,
            EnergyCategory::RxData => 1,
            EnergyCategory::TxControl => 2,
            EnergyCategory::RxControl => 3,
        }
    }
}

/// Emitted by the debit that drains a node to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeathEvent {
    pub node: NodeId,
}

#[derive(Debug, Error, PartialEq)]
pub enum LedgerError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("debit amount must be finite and non-negative, got {0}")]
    InvalidAmount(f64),
}

const FJ_PER_J: f64 = 1e15;

/// Converts joules to integer femtojoules (round to nearest).
pub fn to_femtojoules(joules: f64) -> u128 {
    (joules * FJ_PER_J).round() as u128
}

fn to_joules(fj: u128) -> f64 {
    fj as f64 / FJ_PER_J
}

/// Remaining energy and cumulative debits per node.
///
/// Amounts are kept as integer femtojoules so that
/// `initial == remaining + Σ debits` holds exactly after any sequence of debits.
/// Debits are floored at the remaining energy; the recorded debit is the
/// amount actually drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyLedger {
    initial: Vec<u128>,
    remaining: Vec<u128>,
    debits: Vec<[u128; 4]>,
    frozen: bool,
}

impl EnergyLedger {
    pub fn new(initial_joules: &[f64]) -> Self {
        let initial: Vec<u128> = initial_joules.iter().map(|&j| to_femtojoules(j.max(0.0))).collect();
        Self {
            remaining: initial.clone(),
            debits: vec![[0; 4]; initial.len()],
            initial,
            frozen: false,
        }
    }

    /// A ledger that accepts debits but never changes (used for fixed-point studies).
    pub fn frozen(initial_joules: &[f64]) -> Self {
        Self {
            frozen: true,
            ..Self::new(initial_joules)
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn remaining(&self, node: NodeId) -> f64 {
        to_joules(self.remaining[node.0])
    }

    pub fn remaining_fj(&self, node: NodeId) -> u128 {
        self.remaining[node.0]
    }

    pub fn remaining_all(&self) -> Vec<f64> {
        self.remaining.iter().map(|&fj| to_joules(fj)).collect()
    }

    pub fn initial(&self, node: NodeId) -> f64 {
        to_joules(self.initial[node.0])
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.remaining[node.0] > 0
    }

    pub fn debited(&self, node: NodeId, category: EnergyCategory) -> f64 {
        to_joules(self.debits[node.0][category.slot()])
    }

    /// `initial − remaining − Σ debits` in femtojoules; zero for a consistent ledger.
    pub fn conservation_error_fj(&self, node: NodeId) -> i128 {
        let i = node.0;
        let spent: u128 = self.debits[i].iter().sum();
        self.initial[i] as i128 - self.remaining[i] as i128 - spent as i128
    }

    pub fn debit(
        &mut self,
        node: NodeId,
        joules: f64,
        category: EnergyCategory,
    ) -> Result<Option<DeathEvent>, LedgerError> {
        if !(joules.is_finite() && joules >= 0.0) {
            return Err(LedgerError::InvalidAmount(joules));
        }
        self.debit_fj(node, to_femtojoules(joules), category)
    }

    /// Debit an exact femtojoule amount.
    pub fn debit_fj(
        &mut self,
        node: NodeId,
        amount: u128,
        category: EnergyCategory,
    ) -> Result<Option<DeathEvent>, LedgerError> {
        let i = node.0;
        if i >= self.remaining.len() {
            return Err(LedgerError::UnknownNode(node));
        }
        if self.frozen || amount == 0 || self.remaining[i] == 0 {
            return Ok(None);
        }
        let drawn = amount.min(self.remaining[i]);
        self.remaining[i] -= drawn;
        self.debits[i][category.slot()] += drawn;
        if self.remaining[i] == 0 {
            Ok(Some(DeathEvent { node }))
        } else {
            Ok(None)
        }
    }

    /// CSV rows `round,node,remaining_J,tx_data_J,rx_data_J,tx_ctl_J,rx_ctl_J` (no header).
    pub fn snapshot_rows(&self, round: u64) -> Vec<String> {
        (0..self.len())
            .map(|i| {
                let d = &self.debits[i];
                format!(
                    "{},{},{},{},{},{},{}",
                    round,
                    i,
                    to_joules(self.remaining[i]),
                    to_joules(d[0]),
                    to_joules(d[1]),
                    to_joules(d[2]),
                    to_joules(d[3])
                )
            })
            .collect()
    }
}

pub const LEDGER_CSV_HEADER: &str = "round,node,remaining_J,tx_data_J,rx_data_J,tx_ctl_J,rx_ctl_J";

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn tx_energy_point_values() {
        let r = RadioParams::default();
        assert!(rel(r.tx_energy(50.0, 1), 75e-9) < 1e-15);
        assert!(rel(r.tx_energy(100.0, 1), 180e-9) < 1e-15);
        assert!(rel(r.tx_energy(100.0, 288), 51.84e-6) < 1e-12);
        assert_eq!(r.tx_energy(73.0, 0), 0.0);
    }

    #[test]
    fn rx_energy_point_values() {
        let r = RadioParams::default();
        assert!(rel(r.rx_energy(1), 50e-9) < 1e-15);
        assert!(rel(r.rx_energy(288), 14.4e-6) < 1e-12);
        assert_eq!(r.rx_energy(0), 0.0);
    }

    #[test]
    fn branches_nearly_meet_at_crossover() {
        let r = RadioParams::default();
        let fs = r.e_elec + r.eps_fs * r.d0 * r.d0;
        let mp = r.e_elec + r.eps_mp * r.d0.powi(4);
        assert!(((fs - mp) / fs).abs() <= 0.005);
        // d0 ≈ sqrt(eps_fs / eps_mp)
        assert!(rel(r.d0, (r.eps_fs / r.eps_mp).sqrt()) < 0.01);
        // the multipath branch applies at d0 exactly
        assert_eq!(r.tx_per_bit(r.d0), mp);
    }

    #[test]
    fn radius_inverts_tx_per_bit() {
        let r = RadioParams::default();
        for d in [0.0, 10.0, 50.0, 87.0, 87.8, 120.0, 300.0, 2000.0] {
            let back = r.radius_for(r.tx_per_bit(d));
            assert!((back - d).abs() < 1e-6 * d.max(1.0), "{d} -> {back}");
        }
    }

    #[test]
    fn validate_rejects_non_positive() {
        let mut r = RadioParams::default();
        assert!(r.validate().is_ok());
        r.eps_mp = 0.0;
        assert_eq!(r.validate(), Err(RadioError::NonPositive("eps_mp")));
    }

    #[test]
    fn debit_decrements_and_reports_death() {
        let mut l = EnergyLedger::new(&[100e-9, 50e-9]);
        assert_eq!(l.debit(NodeId(0), 75e-9, EnergyCategory::TxData), Ok(None));
        assert!((l.remaining(NodeId(0)) - 25e-9).abs() < 1e-18);

        let ev = l.debit(NodeId(1), 75e-9, EnergyCategory::TxControl).unwrap();
        assert_eq!(ev, Some(DeathEvent { node: NodeId(1) }));
        assert_eq!(l.remaining(NodeId(1)), 0.0);
        assert!(!l.is_alive(NodeId(1)));
        // only what was available is recorded
        assert!((l.debited(NodeId(1), EnergyCategory::TxControl) - 50e-9).abs() < 1e-18);
        // a dead node emits no second event
        assert_eq!(l.debit(NodeId(1), 1e-9, EnergyCategory::TxControl), Ok(None));
    }

    #[test]
    fn zero_debit_is_noop() {
        let mut l = EnergyLedger::new(&[1.0]);
        let before = l.clone();
        assert_eq!(l.debit(NodeId(0), 0.0, EnergyCategory::RxData), Ok(None));
        assert_eq!(l, before);
    }

    #[test]
    fn debit_errors() {
        let mut l = EnergyLedger::new(&[1.0]);
        assert_eq!(
            l.debit(NodeId(3), 1.0, EnergyCategory::RxData),
            Err(LedgerError::UnknownNode(NodeId(3)))
        );
        assert!(matches!(
            l.debit(NodeId(0), -1.0, EnergyCategory::RxData),
            Err(LedgerError::InvalidAmount(_))
        ));
    }

    #[test]
    fn frozen_ledger_ignores_debits() {
        let mut l = EnergyLedger::frozen(&[2.0]);
        l.debit(NodeId(0), 1.0, EnergyCategory::TxData).unwrap();
        assert_eq!(l.remaining(NodeId(0)), 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conservation_holds_exactly(
                init in prop::collection::vec(0.0f64..10.0, 1..6),
                ops in prop::collection::vec((0usize..6, 0.0f64..3.0, 0usize..4), 0..60),
            ) {
                let mut l = EnergyLedger::new(&init);
                for (node, amount, cat) in ops {
                    let node = NodeId(node % init.len());
                    let before = l.remaining(node);
                    l.debit(node, amount, EnergyCategory::ALL[cat]).unwrap();
                    prop_assert!(l.remaining(node) <= before);
                }
                for i in 0..init.len() {
                    prop_assert_eq!(l.conservation_error_fj(NodeId(i)), 0);
                }
            }

            #[test]
            fn tx_energy_monotone_and_linear(d in 0.0f64..500.0, dd in 0.001f64..50.0, k in 1u64..4096) {
                let r = RadioParams::default();
                prop_assert!(r.tx_per_bit(d + dd) > r.tx_per_bit(d));
                let per_bit = r.tx_energy(d, 1);
                prop_assert!(((r.tx_energy(d, k) - per_bit * k as f64) / r.tx_energy(d, k)).abs() < 1e-12);
            }
        }
    }
}
