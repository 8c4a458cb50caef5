use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines;
use crate::net::{NetworkInstance, NodeId, PowerAssignment, PowerLevel};
use crate::radio::{EnergyCategory, EnergyLedger};

use super::node::{napa_decide, NapaDecision, NodeState};
use super::{Message, Payload, ProtocolConfig, ProtocolError};

pub const TRACE_CSV_HEADER: &str = "time,node,event,details";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    Help,
    Reduce,
    /// Power lowered because the node defining it died.
    Purge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerChange {
    pub time: f64,
    pub node: NodeId,
    pub old: PowerLevel,
    pub new: PowerLevel,
    pub kind: ChangeKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoundReport {
    pub round: u64,
    pub changes: Vec<PowerChange>,
    pub napa_runs: u32,
    pub messages: u64,
    /// Reductions that disconnected the alive nodes.
    pub broken_reductions: u32,
    pub stale: u32,
    pub deaths: Vec<NodeId>,
}

#[derive(Debug, Clone)]
enum Event {
    Deliver { to: NodeId, msg: Arc<Message> },
    RoundStart(NodeId),
    Napa(NodeId),
    HelpFinish(NodeId),
    ResetShared(NodeId),
}

const CLASS_MESSAGE: u8 = 0;
const CLASS_TIMER: u8 = 1;

/// All node states plus the shared radio medium and event queue.
pub struct World<'a> {
    net: &'a NetworkInstance,
    cfg: ProtocolConfig,
    ledger: EnergyLedger,
    nodes: Vec<NodeState>,
    queue: BTreeMap<(u64, u8, u64), Event>,
    seq: u64,
    now: f64,
    round_start: f64,
    rng: ChaCha8Rng,
    round: u64,
    in_init: bool,
    trace: Vec<String>,
    report: RoundReport,
}

impl<'a> World<'a> {
    /// Initialization with DLSS powers.
    pub fn initialize(net: &'a NetworkInstance, cfg: ProtocolConfig, seed: u64) -> Result<Self, ProtocolError> {
        Self::build(net, cfg, seed, None)
    }

    /// Initialization with a given starting assignment in place of DLSS.
    pub fn initialize_from(
        net: &'a NetworkInstance,
        cfg: ProtocolConfig,
        seed: u64,
        assignment: PowerAssignment,
    ) -> Result<Self, ProtocolError> {
        net.validate_assignment(&assignment)
            .map_err(|e| ProtocolError::InitFailure(e.to_string()))?;
        Self::build(net, cfg, seed, Some(assignment))
    }

    fn build(
        net: &'a NetworkInstance,
        cfg: ProtocolConfig,
        seed: u64,
        assignment: Option<PowerAssignment>,
    ) -> Result<Self, ProtocolError> {
        cfg.validate()?;
        let initial = net.initial_energies();
        let ledger = if cfg.debit_energy {
            EnergyLedger::new(&initial)
        } else {
            EnergyLedger::frozen(&initial)
        };
        let nodes = net
            .ids()
            .map(|i| NodeState::new(i, net.menu(i).clone(), net.initial_energy(i)))
            .collect();
        let mut w = World {
            net,
            cfg,
            ledger,
            nodes,
            queue: BTreeMap::new(),
            seq: 0,
            now: 0.0,
            round_start: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            round: 0,
            in_init: true,
            trace: Vec::new(),
            report: RoundReport::default(),
        };
        for i in net.ids() {
            let energy = w.ledger.remaining(i);
            w.send(i, Payload::Hello { energy }, net.p_max(), None);
        }
        for i in net.ids() {
            let links = w.nodes[i.0].links.iter().map(|(&x, &l)| (x, l)).collect();
            let top = w.nodes[i.0].menu.max();
            w.send(i, Payload::NeighborInfo { links }, top, None);
        }
        let assignment = match assignment {
            Some(a) => a,
            None => {
                baselines::dlss(net)
                    .map_err(|e| ProtocolError::InitFailure(e.to_string()))?
                    .assignment
            }
        };
        for i in net.ids() {
            w.nodes[i.0].power = assignment.get(i);
        }
        for i in net.ids() {
            let power = w.nodes[i.0].power;
            let top = w.nodes[i.0].menu.max();
            w.send(i, Payload::PowerAnnounce { power, able: false }, top, None);
        }
        if let Some(s) = w.nodes.iter().find(|s| s.reachable_set().is_empty()) {
            return Err(ProtocolError::InitFailure(format!("node {} reaches nobody", s.id)));
        }
        for i in net.ids() {
            w.sync(i);
            if let Err(e) = w.nodes[i.0].recompute_able() {
                log::debug!("init: {e}");
            }
        }
        for i in net.ids() {
            let (able, power) = (w.nodes[i.0].able, w.nodes[i.0].power);
            w.send(i, Payload::StatusFlag { able }, power, None);
        }
        w.in_init = false;
        Ok(w)
    }

    pub fn net(&self) -> &NetworkInstance {
        self.net
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn node(&self, i: NodeId) -> &NodeState {
        &self.nodes[i.0]
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    /// Mutable ledger access for traffic charged outside the protocol.
    /// Call [`World::sync_deaths`] afterwards.
    pub fn ledger_mut(&mut self) -> &mut EnergyLedger {
        &mut self.ledger
    }

    pub fn rounds_run(&self) -> u64 {
        self.round
    }

    pub fn alive(&self) -> Vec<bool> {
        self.nodes.iter().map(|s| s.alive).collect()
    }

    /// Current powers, 0 for dead nodes.
    pub fn assignment(&self) -> PowerAssignment {
        PowerAssignment::new(
            self.nodes
                .iter()
                .map(|s| if s.alive { s.power } else { 0.0 })
                .collect(),
        )
    }

    pub fn is_connected(&self) -> bool {
        let alive = self.alive();
        alive.iter().all(|&a| a) && self.net.is_strongly_connected(&self.assignment())
    }

    pub fn trace_lines(&self) -> &[String] {
        &self.trace
    }

    pub fn trace_csv(&self) -> String {
        let mut s = format!("{TRACE_CSV_HEADER}\n");
        for l in &self.trace {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    /// Marks nodes the ledger reports as exhausted as dead.
    pub fn sync_deaths(&mut self) -> Vec<NodeId> {
        let mut died = Vec::new();
        for i in self.net.ids() {
            if self.nodes[i.0].alive && !self.ledger.is_alive(i) {
                self.nodes[i.0].alive = false;
                died.push(i);
            }
        }
        died
    }

    fn log(&mut self, node: NodeId, event: &str, details: String) {
        if self.cfg.trace {
            self.trace.push(format!("{:.6},{},{},{}", self.now, node, event, details));
        }
    }

    fn sync(&mut self, i: NodeId) {
        self.nodes[i.0].energy = self.ledger.remaining(i);
    }

    fn charge(&mut self, i: NodeId, joules: f64, cat: EnergyCategory) {
        match self.ledger.debit(i, joules, cat) {
            Ok(Some(_)) => {
                if self.nodes[i.0].alive {
                    self.nodes[i.0].alive = false;
                    self.report.deaths.push(i);
                    self.log(i, "death", String::new());
                }
            }
            Ok(None) => {}
            Err(e) => log::error!("ledger: {e}"),
        }
    }

    fn schedule(&mut self, time: f64, class: u8, ev: Event) {
        self.seq += 1;
        self.queue.insert((time.to_bits(), class, self.seq), ev);
    }

    fn schedule_napa(&mut self, i: NodeId) {
        if self.nodes[i.0].q >= self.cfg.q_max {
            return;
        }
        let t = self.now + self.rng.gen_range(0.0..=self.cfg.t1);
        self.schedule(t, CLASS_TIMER, Event::Napa(i));
    }

    /// Addressed messages go out at the sender's power or the power needed
    /// to reach the farthest addressee, whichever is larger.
    fn addressed_power(&self, from: NodeId, to: &[NodeId]) -> PowerLevel {
        to.iter()
            .map(|&x| self.net.link_power(from, x))
            .fold(self.nodes[from.0].power, f64::max)
    }

    fn send(&mut self, from: NodeId, payload: Payload, tx_power: PowerLevel, to: Option<Vec<NodeId>>) {
        if !self.nodes[from.0].alive {
            return;
        }
        let bits = self.cfg.control_bits;
        let msg = Arc::new(Message {
            sender: from,
            payload,
            tx_power,
            bits,
            to,
        });
        self.report.messages += 1;
        self.log(from, "send", msg.to_string());
        let receivers: Vec<NodeId> = self
            .net
            .ids()
            .filter(|&j| j != from && self.nodes[j.0].alive && self.net.link_power(from, j) <= tx_power)
            .collect();
        self.charge(from, tx_power * bits as f64, EnergyCategory::TxControl);
        let rx = self.net.radio().rx_energy(bits);
        for &j in &receivers {
            self.charge(j, rx, EnergyCategory::RxControl);
        }
        for j in receivers {
            if msg.to.as_ref().is_some_and(|t| !t.contains(&j)) {
                continue;
            }
            if self.in_init {
                self.handle(j, &msg);
            } else {
                let ev = Event::Deliver {
                    to: j,
                    msg: Arc::clone(&msg),
                };
                self.schedule(self.now, CLASS_MESSAGE, ev);
            }
        }
    }

    fn announce(&mut self, i: NodeId) {
        let s = &self.nodes[i.0];
        let payload = Payload::PowerAnnounce {
            power: s.power,
            able: s.able,
        };
        let top = s.menu.max();
        self.send(i, payload, top, None);
    }

    /// Recomputes `S_r`; a flip is broadcast and triggers another NAPA step.
    fn reevaluate(&mut self, r: NodeId) {
        self.sync(r);
        let old = self.nodes[r.0].able;
        if let Err(e) = self.nodes[r.0].recompute_able() {
            self.report.stale += 1;
            log::debug!("{e}");
        }
        let able = self.nodes[r.0].able;
        if able != old {
            self.log(r, "flag", format!("able={able}"));
            let power = self.nodes[r.0].power;
            self.send(r, Payload::StatusFlag { able }, power, None);
            self.schedule_napa(r);
        }
    }

    fn handle(&mut self, r: NodeId, msg: &Message) {
        if !self.nodes[r.0].alive {
            return;
        }
        let j = msg.sender;
        if self.cfg.trace {
            self.log(r, "recv", msg.to_string());
        }
        match &msg.payload {
            Payload::Hello { energy } => {
                let l = self.net.link_power(j, r);
                let s = &mut self.nodes[r.0];
                s.links.insert(j, l);
                s.entry(j).energy = Some(*energy);
            }
            Payload::NeighborInfo { links } => {
                self.nodes[r.0].entry(j).links = Some(links.iter().copied().collect());
            }
            Payload::PowerAnnounce { power, able } => {
                self.update_power(r, j, *power, Some(*able));
            }
            Payload::StatusFlag { able } => {
                self.nodes[r.0].entry(j).able = Some(*able);
            }
            Payload::EnergyBroadcast { energy } => {
                self.nodes[r.0].entry(j).energy = Some(*energy);
            }
            Payload::EnergyRequest => {
                if !self.nodes[r.0].energy_shared {
                    self.share_energy(r);
                }
            }
            Payload::NeighborInfoRequest => {
                self.update_power(r, j, msg.tx_power, None);
                self.sync(r);
                let s = &self.nodes[r.0];
                let reply = Payload::NeighborInfoReply {
                    energy: s.energy,
                    power: s.power,
                    able: s.able,
                };
                let p = self.addressed_power(r, &[j]);
                self.send(r, reply, p, Some(vec![j]));
            }
            Payload::NeighborInfoReply { energy, power, able } => {
                self.nodes[r.0].entry(j).energy = Some(*energy);
                self.update_power(r, j, *power, Some(*able));
            }
        }
    }

    fn update_power(&mut self, r: NodeId, j: NodeId, power: PowerLevel, able: Option<bool>) {
        let l = self.net.link_power(j, r);
        let s = &mut self.nodes[r.0];
        let e = s.entry(j);
        e.power = Some(power);
        if let Some(a) = able {
            e.able = Some(a);
        }
        if power < l {
            s.reverse.remove(&j);
        } else {
            s.reverse.insert(j);
        }
        if !self.in_init {
            self.reevaluate(r);
        }
    }

    fn share_energy(&mut self, i: NodeId) {
        self.sync(i);
        self.nodes[i.0].energy_shared = true;
        let (energy, power) = (self.nodes[i.0].energy, self.nodes[i.0].power);
        self.send(i, Payload::EnergyBroadcast { energy }, power, None);
    }

    fn set_power(&mut self, i: NodeId, new: PowerLevel, kind: ChangeKind) {
        let old = self.nodes[i.0].power;
        self.nodes[i.0].power = new;
        self.log(i, "power", format!("{kind:?} {old:.6e}->{new:.6e}"));
        self.report.changes.push(PowerChange {
            time: self.now,
            node: i,
            old,
            new,
            kind,
        });
    }

    fn connected_now(&self) -> bool {
        self.net.is_strongly_connected_among(&self.assignment(), &self.alive())
    }

    /// Flags a reduction that disconnected alive nodes which were connected
    /// just before it.
    fn audit(&mut self, i: NodeId) {
        if !self.connected_now() {
            self.report.broken_reductions += 1;
            log::warn!(
                "round {}: reduction by node {i} left the alive nodes disconnected",
                self.round
            );
        }
    }

    fn napa(&mut self, i: NodeId) {
        self.sync(i);
        let decision = napa_decide(&self.nodes[i.0], &self.cfg);
        if decision == NapaDecision::Exhausted {
            return;
        }
        self.nodes[i.0].q += 1;
        self.report.napa_runs += 1;
        if self.cfg.trace {
            let d = match &decision {
                NapaDecision::Help { new_power, target, covered } => {
                    format!("help {new_power:.6e} for {target} via {covered}")
                }
                NapaDecision::Reduce { new_power } => format!("reduce {new_power:.6e}"),
                NapaDecision::Idle => "idle".into(),
                NapaDecision::Stale(_) => "stale".into(),
                NapaDecision::Exhausted => unreachable!(),
            };
            self.log(i, "napa", d);
        }
        match decision {
            NapaDecision::Help { new_power, .. } => {
                self.set_power(i, new_power, ChangeKind::Help);
                self.send(i, Payload::NeighborInfoRequest, new_power, None);
                self.schedule(self.now, CLASS_TIMER, Event::HelpFinish(i));
            }
            NapaDecision::Reduce { new_power } => {
                let was_connected = self.connected_now();
                self.set_power(i, new_power, ChangeKind::Reduce);
                self.finish_change(i);
                if was_connected {
                    self.audit(i);
                }
            }
            NapaDecision::Idle => {
                let _ = self.nodes[i.0].recompute_able();
            }
            NapaDecision::Stale(why) => {
                self.report.stale += 1;
                log::debug!("node {i}: NAPA skipped, {why}");
            }
            NapaDecision::Exhausted => unreachable!(),
        }
    }

    /// Recomputes `S_i`, informs the neighborhood and continues the chain.
    fn finish_change(&mut self, i: NodeId) {
        self.sync(i);
        if let Err(e) = self.nodes[i.0].recompute_able() {
            self.report.stale += 1;
            log::debug!("{e}");
        }
        self.announce(i);
        if self.nodes[i.0].able {
            self.schedule_napa(i);
        }
    }

    fn round_start(&mut self, i: NodeId) {
        self.nodes[i.0].q = 0;
        if !self.nodes[i.0].energy_shared {
            self.share_energy(i);
        }
        let reverse: Vec<NodeId> = self.nodes[i.0].reverse.iter().copied().collect();
        if !reverse.is_empty() {
            let p = self.addressed_power(i, &reverse);
            self.send(i, Payload::EnergyRequest, p, Some(reverse));
        }
        let t = self.round_start + self.rng.gen_range(0.0..=self.cfg.t1);
        self.schedule(t, CLASS_TIMER, Event::Napa(i));
        self.schedule(self.round_start + self.cfg.t2, CLASS_TIMER, Event::ResetShared(i));
    }

    /// Drops dead nodes from every table. A node whose power was set by a
    /// dead neighbor falls back to its farthest alive neighbor.
    fn purge(&mut self) {
        let dead: Vec<NodeId> = self.net.ids().filter(|i| !self.nodes[i.0].alive).collect();
        if dead.is_empty() {
            return;
        }
        for i in self.net.ids() {
            if !self.nodes[i.0].alive {
                continue;
            }
            for &d in &dead {
                self.nodes[i.0].forget(d);
            }
            let s = &self.nodes[i.0];
            let reach = s
                .links
                .values()
                .copied()
                .filter(|&l| l <= s.power)
                .fold(0.0, f64::max);
            if reach > 0.0 && reach < s.power {
                self.set_power(i, reach, ChangeKind::Purge);
                self.announce(i);
            }
        }
    }

    /// One power-adjustment round: energy exchange, NAPA chains in random
    /// order, then the flag reset and the round barrier.
    pub fn run_round(&mut self) -> Result<RoundReport, ProtocolError> {
        self.round += 1;
        self.round_start = (self.round - 1) as f64 * self.cfg.t3;
        self.now = self.round_start;
        self.report = RoundReport {
            round: self.round,
            ..RoundReport::default()
        };
        self.sync_deaths();
        let alive = self.alive();
        if !alive.iter().any(|&a| a) || !self.net.is_strongly_connected_among(&self.assignment(), &alive) {
            return Err(ProtocolError::RoundAborted(self.round));
        }
        self.purge();
        self.drain(self.round_start, true);
        let mut order: Vec<NodeId> = self.net.ids().filter(|i| self.nodes[i.0].alive).collect();
        for &i in &order {
            self.sync(i);
            let _ = self.nodes[i.0].recompute_able();
        }
        order.shuffle(&mut self.rng);
        for i in order {
            self.schedule(self.round_start, CLASS_TIMER, Event::RoundStart(i));
        }
        let end = self.round_start + self.cfg.t3;
        self.drain(end, false);
        if !self.queue.is_empty() {
            log::debug!("round {}: {} events past the barrier dropped", self.round, self.queue.len());
            self.queue.clear();
        }
        self.now = end;
        Ok(std::mem::take(&mut self.report))
    }

    /// Processes events before `until`, or up to and including it when
    /// `inclusive` is set.
    fn drain(&mut self, until: f64, inclusive: bool) {
        while let Some(entry) = self.queue.first_entry() {
            let t = f64::from_bits(entry.key().0);
            if t > until || (t == until && !inclusive) {
                break;
            }
            let ev = entry.remove();
            self.now = t;
            match ev {
                Event::Deliver { to, msg } => self.handle(to, &msg),
                Event::RoundStart(i) if self.nodes[i.0].alive => self.round_start(i),
                Event::Napa(i) if self.nodes[i.0].alive => self.napa(i),
                Event::HelpFinish(i) if self.nodes[i.0].alive => self.finish_change(i),
                Event::ResetShared(i) => self.nodes[i.0].energy_shared = false,
                _ => {}
            }
        }
    }
}
