//! Cooperative, game-theoretic topology control for energy-constrained
//! wireless multi-hop networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`radio`] – first-order radio energy model and the per-node energy ledger.
//! * [`net`] – deployments, link powers, power menus and directed reachability.
//! * [`game`] – estimated/potential lifetimes, utilities and the potential function.
//! * [`baselines`] – static topologies (DLSS, DRNG, maximum power).
//! * [`protocol`] – the distributed CTCA protocol driven by simulated messages.
//! * [`optimal`] – centralized max-min lifetime benchmark and price metric.
//! * [`sim`] – round-driven simulation with traffic, routing and lifetime measurement.

pub mod baselines;
pub mod deploy;
pub mod game;
mod graph;
pub mod net;
pub mod optimal;
pub mod protocol;
pub mod radio;
pub mod sim;

pub use net::{NetworkInstance, NodeId, PowerAssignment, PowerLevel, PowerMenu};
pub use radio::{EnergyLedger, RadioParams};

/// Derives the seed of replication `index` from a base seed (SplitMix64 step).
pub fn replication_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
