//! The distributed CTCA protocol over a simulated message-passing world.
//!
//! Nodes only act on their own tables; the [`World`] delivers messages,
//! charges radio energy and serializes events by `(time, class, seq)`.
//! Message deliveries carry zero delay and cascade before any timer
//! scheduled for the same instant.

mod node;
pub mod world;

use std::fmt;

use thiserror::Error;

use crate::net::{NodeId, PowerLevel};

pub use node::{napa_decide, NapaDecision, NeighborEntry, NodeState};
pub use world::{PowerChange, RoundReport, World, TRACE_CSV_HEADER};

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// `Q`: NAPA executions allowed per node per round.
    pub q_max: u32,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub control_bits: u64,
    pub data_bits: u64,
    /// When false the ledger is frozen and nothing is charged.
    pub debit_energy: bool,
    /// Record a `time,node,event,details` line per event.
    pub trace: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            q_max: 4,
            t1: 1.0,
            t2: 500.0,
            t3: 1000.0,
            control_bits: 288,
            data_bits: 288,
            debit_energy: true,
            trace: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::Config(m.into()));
        if self.q_max < 1 {
            return bad("Q must be at least 1");
        }
        if !(self.t1 >= 0.0 && self.t1.is_finite()) {
            return bad("T1 must be finite and nonnegative");
        }
        if !(0.0 < self.t2 && self.t2 < self.t3 && self.t3.is_finite()) {
            return bad("need 0 < T2 < T3");
        }
        if self.t1 >= self.t2 {
            return bad("T1 must be below T2");
        }
        if self.control_bits == 0 || self.data_bits == 0 {
            return bad("packet sizes must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol config: {0}")]
    Config(String),
    #[error("initialization failed: {0}")]
    InitFailure(String),
    #[error("round {0} started on a disconnected network")]
    RoundAborted(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hello { energy: f64 },
    NeighborInfo { links: Vec<(NodeId, PowerLevel)> },
    PowerAnnounce { power: PowerLevel, able: bool },
    StatusFlag { able: bool },
    EnergyBroadcast { energy: f64 },
    EnergyRequest,
    NeighborInfoRequest,
    NeighborInfoReply { energy: f64, power: PowerLevel, able: bool },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Hello { .. } => "hello",
            Payload::NeighborInfo { .. } => "neighbor_info",
            Payload::PowerAnnounce { .. } => "power_announce",
            Payload::StatusFlag { .. } => "status_flag",
            Payload::EnergyBroadcast { .. } => "energy_broadcast",
            Payload::EnergyRequest => "energy_request",
            Payload::NeighborInfoRequest => "neighbor_info_request",
            Payload::NeighborInfoReply { .. } => "neighbor_info_reply",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: NodeId,
    pub payload: Payload,
    pub tx_power: PowerLevel,
    pub bits: u64,
    /// `None` for a broadcast.
    pub to: Option<Vec<NodeId>>,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} from {} at {:.4e}", self.payload.kind(), self.sender, self.tx_power)
    }
}
