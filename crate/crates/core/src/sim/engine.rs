use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{tx_power_cost, Energy, EnergyBudget};
use crate::error::{Error, Result};
use crate::estimators::{DelayEstimator, PrrEstimator, SeqGapTracker};
use crate::forwarding::{decide, update_lag_time, RouteRequest};
use crate::geometry::dist;
use crate::metrics::{DropCause, MetricsLedger};
use crate::neighborhood::{AckInfo, HelloMessage, LocalView, NeighborTable, TwoHopEntry};
use crate::queueing::{QueueBank, QueueFull};
use crate::types::{NodeId, Packet, PacketClass, PacketId};

use super::config::{LifetimeDefinition, SimConfig};
use super::topology::{generate_topology, Topology};

#[derive(Debug, Clone)]
enum EventKind {
    CbrTick,
    HelloDue(NodeId),
    EnergyAudit,
    /// The data frame has left `from`'s radio.
    TransmissionComplete {
        from: NodeId,
        to: NodeId,
        packet: Box<Packet>,
        attempt: u32,
        seq: u64,
    },
    /// The data frame reached `to`.
    PacketArrival {
        from: NodeId,
        to: NodeId,
        packet: Box<Packet>,
        attempt: u32,
        seq: u64,
    },
    AckReceived {
        node: NodeId,
        packet: PacketId,
        attempt: u32,
        info: AckInfo,
    },
    AckTimeout {
        node: NodeId,
        packet: PacketId,
        attempt: u32,
    },
    PromotionTimer {
        node: NodeId,
        packet: PacketId,
        deadline: f64,
    },
}

impl EventKind {
    fn name(&self) -> &'static str {
        match self {
            EventKind::CbrTick => "cbr_tick",
            EventKind::HelloDue(_) => "hello_due",
            EventKind::EnergyAudit => "energy_audit",
            EventKind::TransmissionComplete { .. } => "transmission_complete",
            EventKind::PacketArrival { .. } => "packet_arrival",
            EventKind::AckReceived { .. } => "ack_received",
            EventKind::AckTimeout { .. } => "ack_timeout",
            EventKind::PromotionTimer { .. } => "promotion_timer",
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct LinkIn {
    prr: PrrEstimator,
    data: SeqGapTracker,
    hello: SeqGapTracker,
}

#[derive(Debug, Clone)]
struct InFlight {
    packet: Packet,
    next_hop: NodeId,
    attempt: u32,
    /// When the packet became head of line.
    t_s: f64,
    /// The current attempt's frame has not landed yet.
    frame_in_air: bool,
}

#[derive(Debug, Clone)]
struct Node {
    alive: bool,
    energy: EnergyBudget,
    table: NeighborTable,
    delays: DelayEstimator,
    links_in: BTreeMap<NodeId, LinkIn>,
    data_seq: BTreeMap<NodeId, u64>,
    hello_seq: u64,
    queue: QueueBank,
    mac: Option<InFlight>,
    seen: BTreeSet<PacketId>,
}

#[derive(Debug, Clone)]
struct CopyState {
    logical: PacketId,
    holders: u32,
    resolved: bool,
    /// Most recent reason a holder lost the copy.
    cause: Option<DropCause>,
}

#[derive(Debug, Clone)]
struct LogicalState {
    class: PacketClass,
    creation: f64,
    deadline: f64,
    open_copies: u32,
    delivered: bool,
}

/// Result of a run, with the optional event trace.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: MetricsLedger,
    pub trace: Option<String>,
    pub topology: Topology,
    /// Final battery state of every node, indexed by id.
    pub batteries: Vec<EnergyBudget>,
}

/// Runs one simulation and returns its ledger.
pub fn run(cfg: &SimConfig) -> Result<MetricsLedger> {
    Ok(Simulation::new(cfg, false)?.run()?.ledger)
}

/// Runs one simulation, also recording a line-oriented event trace.
pub fn run_traced(cfg: &SimConfig) -> Result<RunOutput> {
    Simulation::new(cfg, true)?.run()
}

pub(crate) struct Simulation {
    cfg: SimConfig,
    topo: Topology,
    adjacency: Vec<Vec<NodeId>>,
    nodes: Vec<Node>,
    events: BinaryHeap<Scheduled>,
    next_seq: u64,
    now: f64,
    rng: ChaCha8Rng,
    ledger: MetricsLedger,
    copies: BTreeMap<PacketId, CopyState>,
    logical: BTreeMap<PacketId, LogicalState>,
    next_packet_id: PacketId,
    energy_log: Energy,
    trace: Option<String>,
    recent: VecDeque<(f64, &'static str)>,
    stopped: bool,
    tx_cost: Energy,
    rx_cost: Energy,
    idle_cost: Energy,
}

impl Simulation {
    pub(crate) fn new(cfg: &SimConfig, traced: bool) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.resolved();
        let topo = generate_topology(&cfg, cfg.rng_seed)?;
        let adjacency = topo.adjacency();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(0);

        let death = Energy::from_joules(cfg.energy.tx);
        let initial = Energy::from_joules(cfg.energy.initial);
        let dt_prior = cfg.traffic.payload_bytes as f64 * 8.0 / cfg.radio.bandwidth_bps;
        let nodes = (0..topo.len())
            .map(|i| {
                let id = NodeId::from(i);
                let mains = (topo.sinks.contains(&id) && cfg.energy.mains_powered_sinks)
                    || (id == topo.source && cfg.energy.mains_powered_source);
                let queue = if cfg.routing.protocol.uses_priority_queues() {
                    QueueBank::priority(cfg.queueing.capacity as usize, cfg.queueing.promotion)
                } else {
                    QueueBank::fifo(3 * cfg.queueing.capacity as usize)
                };
                Node {
                    alive: true,
                    energy: if mains {
                        EnergyBudget::mains(initial)
                    } else {
                        EnergyBudget::battery(initial, death)
                    },
                    table: NeighborTable::new(id, cfg.neighborhood.expiry()),
                    delays: DelayEstimator::new(cfg.estimators.gamma, 0.0, dt_prior),
                    links_in: BTreeMap::new(),
                    data_seq: BTreeMap::new(),
                    hello_seq: 0,
                    queue,
                    mac: None,
                    seen: BTreeSet::new(),
                }
            })
            .collect();

        let ledger = MetricsLedger {
            protocol: cfg.routing.protocol.name().to_string(),
            seed: cfg.rng_seed,
            config_hash: cfg.hash(),
            critical_rate: cfg.traffic.critical_rate,
            duration: cfg.duration,
            ..MetricsLedger::default()
        };

        let mut sim = Simulation {
            tx_cost: Energy::from_joules(cfg.energy.tx),
            rx_cost: Energy::from_joules(cfg.energy.rx),
            idle_cost: Energy::from_joules(cfg.energy.idle),
            cfg,
            topo,
            adjacency,
            nodes,
            events: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
            rng,
            ledger,
            copies: BTreeMap::new(),
            logical: BTreeMap::new(),
            next_packet_id: 0,
            energy_log: Energy::ZERO,
            trace: traced.then(String::new),
            recent: VecDeque::with_capacity(32),
            stopped: false,
        };

        for i in 0..sim.nodes.len() {
            let offset = sim.rng.gen::<f64>() * sim.cfg.neighborhood.hello_period;
            sim.schedule(offset, EventKind::HelloDue(NodeId::from(i)));
        }
        sim.schedule(sim.cfg.energy.audit_interval, EventKind::EnergyAudit);
        sim.schedule(sim.cfg.traffic.start, EventKind::CbrTick);
        Ok(sim)
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time >= self.now, "event scheduled in the past");
        self.events.push(Scheduled {
            time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    fn log(&mut self, node: Option<NodeId>, kind: &str, packet: Option<PacketId>, detail: impl std::fmt::Display) {
        if let Some(t) = self.trace.as_mut() {
            let node = node.map_or("-".to_string(), |n| n.0.to_string());
            let packet = packet.map_or("-".to_string(), |p| p.to_string());
            writeln!(t, "{:.9} {} {} {} {}", self.now, node, kind, packet, detail).unwrap();
        }
    }

    fn invariant(&self, msg: impl Into<String>) -> Error {
        let mut m = msg.into();
        m.push_str("; recent events:");
        for (t, k) in &self.recent {
            write!(m, " {t:.6}:{k}").unwrap();
        }
        Error::Invariant(m)
    }

    fn serialization(&self, bytes: u32) -> f64 {
        bytes as f64 * 8.0 / self.cfg.radio.bandwidth_bps
    }

    fn propagation(&self, a: NodeId, b: NodeId) -> f64 {
        dist(self.topo.position(a), self.topo.position(b)) / self.cfg.radio.propagation_speed
    }

    fn link_p(&self, a: NodeId, b: NodeId) -> f64 {
        let d = dist(self.topo.position(a), self.topo.position(b));
        if d > self.cfg.radio.range {
            return 0.0;
        }
        self.cfg.link.delivery_probability(d, self.cfg.radio.range)
    }

    fn ack_time(&self) -> f64 {
        self.serialization(self.cfg.mac.ack_bytes)
    }

    pub(crate) fn run(mut self) -> Result<RunOutput> {
        let duration = self.cfg.duration;
        while let Some(ev) = self.events.pop() {
            if ev.time >= duration {
                break;
            }
            if ev.time < self.now {
                return Err(self.invariant(format!("event at {} precedes clock {}", ev.time, self.now)));
            }
            self.now = ev.time;
            if self.recent.len() == 32 {
                self.recent.pop_front();
            }
            self.recent.push_back((ev.time, ev.kind.name()));
            self.handle(ev.kind)?;
            if self.stopped {
                break;
            }
        }
        self.ledger.end_time = if self.stopped { self.now } else { duration };
        self.finish()
    }

    fn finish(mut self) -> Result<RunOutput> {
        for l in self.logical.values() {
            if !l.delivered && l.open_copies > 0 {
                self.ledger.classes.get_mut(l.class).unresolved += 1;
            }
        }
        if let Some((id, _)) = self.copies.iter().find(|(_, c)| c.holders == 0 && !c.resolved) {
            return Err(self.invariant(format!("copy {id} has no holder but was never resolved")));
        }
        let spent: Energy = self.nodes.iter().map(|n| n.energy.spent()).sum();
        let battery_ok = self
            .nodes
            .iter()
            .filter(|n| !n.energy.is_mains())
            .all(|n| n.energy.initial() - n.energy.residual() == n.energy.spent());
        self.ledger.total_energy_spent = self.energy_log;
        self.ledger.energy_conserved = spent == self.energy_log && battery_ok;
        if !self.ledger.energy_conserved {
            return Err(self.invariant(format!(
                "energy not conserved: nodes report {spent}, deductions sum to {}",
                self.energy_log
            )));
        }
        if let Some(i) = self.nodes.iter().position(|n| !n.queue.is_balanced()) {
            return Err(self.invariant(format!("queue accounting does not balance at node {i}")));
        }
        if !self.ledger.is_closed() {
            return Err(self.invariant("per-class accounting does not close"));
        }
        self.ledger.promotions = self.nodes.iter().map(|n| n.queue.counters().promoted).sum();
        self.ledger.lifetime = match self.cfg.lifetime {
            LifetimeDefinition::FirstDeath => self.ledger.first_death_time,
            LifetimeDefinition::SourceDisconnected => self.ledger.disconnection_time,
        }
        .unwrap_or(self.cfg.duration);
        Ok(RunOutput {
            ledger: self.ledger,
            trace: self.trace,
            batteries: self.nodes.iter().map(|n| n.energy.clone()).collect(),
            topology: self.topo,
        })
    }

    fn handle(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::CbrTick => self.on_cbr_tick(),
            EventKind::HelloDue(x) => self.on_hello(x),
            EventKind::EnergyAudit => self.on_audit(),
            EventKind::TransmissionComplete {
                from,
                to,
                packet,
                attempt,
                seq,
            } => self.on_transmission_complete(from, to, packet, attempt, seq),
            EventKind::PacketArrival {
                from,
                to,
                packet,
                attempt,
                seq,
            } => return self.on_arrival(from, to, *packet, attempt, seq),
            EventKind::AckReceived {
                node,
                packet,
                attempt,
                info,
            } => self.on_ack(node, packet, attempt, info),
            EventKind::AckTimeout { node, packet, attempt } => self.on_ack_timeout(node, packet, attempt),
            EventKind::PromotionTimer { node, packet, deadline } => {
                let n = &mut self.nodes[node.index()];
                if n.alive && n.queue.on_timer_expire(packet, deadline) {
                    self.log(Some(node), "promote", Some(packet), "critical_tail");
                }
            }
        }
        Ok(())
    }

    // ----- energy -------------------------------------------------------

    /// Charges `cost` to `node`; returns true if the node died as a result.
    fn charge(&mut self, node: NodeId, cost: Energy, control: bool) -> bool {
        let n = &mut self.nodes[node.index()];
        let drawn = n.energy.charge(cost);
        self.energy_log += drawn;
        if control {
            self.ledger.control_energy += drawn;
        }
        if n.alive && n.energy.is_dead() {
            self.kill(node);
            return true;
        }
        false
    }

    fn kill(&mut self, node: NodeId) {
        let now = self.now;
        let n = &mut self.nodes[node.index()];
        n.alive = false;
        let drained = n.queue.drain();
        let orphan = match &n.mac {
            Some(m) if !m.frame_in_air => n.mac.take().map(|m| m.packet.id),
            _ => None,
        };
        self.ledger.deaths += 1;
        if self.ledger.first_death_time.is_none() {
            self.ledger.first_death_time = Some(now);
        }
        self.log(
            Some(node),
            "death",
            None,
            format!("residual={}", self.nodes[node.index()].energy.residual().0),
        );
        for p in drained {
            self.lose_instance(p.id, DropCause::DeadNode);
        }
        if let Some(id) = orphan {
            self.lose_instance(id, DropCause::DeadNode);
        }
        if node == self.topo.source {
            self.stopped = true;
        }
        if self.ledger.disconnection_time.is_none() && !self.source_connected() {
            self.ledger.disconnection_time = Some(now);
        }
    }

    fn source_connected(&self) -> bool {
        let seen = self
            .topo
            .reachable(&self.adjacency, self.topo.source, |n| self.nodes[n.index()].alive);
        self.topo.sinks.iter().any(|s| seen[s.index()])
    }

    fn on_audit(&mut self) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].alive {
                self.charge(NodeId::from(i), self.idle_cost, false);
            }
        }
        let next = self.now + self.cfg.energy.audit_interval;
        self.schedule(next, EventKind::EnergyAudit);
    }

    // ----- packet bookkeeping ---------------------------------------------

    fn lose_instance(&mut self, copy: PacketId, cause: DropCause) {
        self.release(copy, Some(cause));
    }

    /// One holder lets go of a copy. The copy is lost once nobody holds it;
    /// its cause is the last one recorded.
    fn release(&mut self, copy: PacketId, cause: Option<DropCause>) {
        let c = self.copies.get_mut(&copy).expect("known copy");
        c.holders -= 1;
        if cause.is_some() {
            c.cause = cause;
        }
        if c.holders > 0 || c.resolved {
            return;
        }
        let cause = c.cause.expect("a lost copy has a cause");
        c.resolved = true;
        let logical_id = c.logical;
        let l = self.logical.get_mut(&logical_id).expect("known logical packet");
        l.open_copies -= 1;
        if l.open_copies == 0 && !l.delivered {
            let class = l.class;
            let stats = self.ledger.classes.get_mut(class);
            stats.drops[cause.index()] += 1;
            if cause == DropCause::Deadline {
                stats.deadline_misses += 1;
            }
        }
        self.log(None, "drop", Some(copy), cause.name());
    }

    fn deliver(&mut self, packet: &Packet) -> Result<()> {
        if packet.trace.windows(2).any(|w| w[1].1 <= w[0].1) {
            return Err(self.invariant(format!("packet {} arrival times not increasing", packet.id)));
        }
        let c = self.copies.get_mut(&packet.id).expect("known copy");
        c.holders -= 1;
        c.resolved = true;
        self.ledger.copies_delivered += 1;
        let l = self
            .logical
            .get_mut(&packet.logical_id())
            .expect("known logical packet");
        l.open_copies -= 1;
        if !l.delivered {
            l.delivered = true;
            let delay = self.now - l.creation;
            let stats = self.ledger.classes.get_mut(l.class);
            stats.delivered += 1;
            stats.delays.push(delay);
            if delay > l.deadline {
                stats.deadline_misses += 1;
            }
        }
        self.log(
            Some(packet.destination),
            "deliver",
            Some(packet.id),
            format!("hops={}", packet.hop_count),
        );
        Ok(())
    }

    fn enqueue_at(&mut self, node: NodeId, packet: Packet) {
        if !self.nodes[node.index()].alive {
            self.lose_instance(packet.id, DropCause::DeadNode);
            return;
        }
        let id = packet.id;
        match self.nodes[node.index()].queue.enqueue(packet, self.now) {
            Ok(timer) => {
                if let Some(deadline) = timer {
                    self.schedule(
                        deadline,
                        EventKind::PromotionTimer {
                            node,
                            packet: id,
                            deadline,
                        },
                    );
                }
                self.try_serve(node);
            }
            Err(QueueFull(p)) => self.lose_instance(p.id, DropCause::QueueFull),
        }
    }

    // ----- traffic --------------------------------------------------------

    fn draw_class(&mut self) -> PacketClass {
        let t = &self.cfg.traffic;
        let u: f64 = self.rng.gen();
        let mut acc = t.critical_rate;
        if u < acc {
            return PacketClass::Critical;
        }
        acc += t.delay_responsive_rate;
        if u < acc {
            return PacketClass::DelayResponsive;
        }
        acc += t.reliability_responsive_rate;
        if u < acc {
            return PacketClass::ReliabilityResponsive;
        }
        PacketClass::Regular
    }

    fn nearest_sink(&self, from: NodeId) -> NodeId {
        let p = self.topo.position(from);
        *self
            .topo
            .sinks
            .iter()
            .min_by(|a, b| {
                dist(p, self.topo.position(**a))
                    .total_cmp(&dist(p, self.topo.position(**b)))
                    .then(a.cmp(b))
            })
            .expect("at least one sink")
    }

    fn on_cbr_tick(&mut self) {
        let source = self.topo.source;
        if !self.nodes[source.index()].alive {
            return;
        }
        let class = self.draw_class();
        let t = &self.cfg.traffic;
        let id = self.next_packet_id;
        let primary = self.nearest_sink(source);
        let packet = Packet::new(id, class, source, primary, t.deadline, t.payload_bytes, self.now);
        let mut copies = vec![packet];
        if self.cfg.routing.protocol == crate::forwarding::Protocol::Tdthr && t.duplicate_classes.contains(&class) {
            for &s in self.topo.sinks.iter().filter(|s| **s != primary) {
                let dup = copies[0].duplicate_toward(id + copies.len() as u64, s);
                copies.push(dup);
            }
        }
        self.next_packet_id += copies.len() as u64;
        self.ledger.classes.get_mut(class).generated += 1;
        self.ledger.copies_generated += copies.len() as u64;
        self.logical.insert(
            id,
            LogicalState {
                class,
                creation: self.now,
                deadline: t.deadline,
                open_copies: copies.len() as u32,
                delivered: false,
            },
        );
        let interval = t.interval();
        for p in copies {
            self.copies.insert(
                p.id,
                CopyState {
                    logical: id,
                    holders: 1,
                    resolved: false,
                    cause: None,
                },
            );
            self.nodes[source.index()].seen.insert(p.id);
            self.log(
                Some(source),
                "generate",
                Some(p.id),
                format!("class={} dest={}", class, p.destination.0),
            );
            self.enqueue_at(source, p);
        }
        let next = self.now + interval;
        self.schedule(next, EventKind::CbrTick);
    }

    // ----- beacons --------------------------------------------------------

    fn on_hello(&mut self, x: NodeId) {
        if !self.nodes[x.index()].alive {
            return;
        }
        let now = self.now;
        let n = &mut self.nodes[x.index()];
        for gone in n.table.evict_expired(now) {
            n.delays.forget(gone);
        }
        n.hello_seq += 1;
        let one_hop = n
            .table
            .records(now)
            .map(|r| TwoHopEntry {
                id: r.neighbor,
                position: r.position,
                dq: r.dq,
                dt: n.delays.dt(r.neighbor),
                prr: r.prr,
                energy: r.energy,
            })
            .collect();
        let hello = HelloMessage {
            sender: x,
            seq: n.hello_seq,
            position: self.topo.position(x),
            energy: n.energy.residual().joules(),
            dq: n.delays.dq_all(),
            reverse_prr: n.links_in.iter().map(|(s, l)| (*s, l.prr.prr())).collect(),
            one_hop,
        };
        let size = hello.wire_size(&self.cfg.neighborhood.wire);
        self.ledger.hello_messages += 1;
        self.ledger.control_bytes += size as u64;
        self.log(Some(x), "hello", None, format!("bytes={size}"));
        let period = self.cfg.neighborhood.hello_period;
        self.schedule(now + period, EventKind::HelloDue(x));
        if self.charge(x, self.idle_cost, true) {
            return;
        }
        for y in self.adjacency[x.index()].clone() {
            if !self.nodes[y.index()].alive {
                continue;
            }
            let p = self.link_p(x, y);
            if self.rng.gen::<f64>() >= p {
                continue;
            }
            if self.charge(y, self.idle_cost, true) {
                continue;
            }
            self.observe_link(y, x, hello.seq, true);
            self.nodes[y.index()].table.process_hello(&hello, now);
        }
    }

    /// Feeds the receiver-side reception estimator for link `from → at`.
    fn observe_link(&mut self, at: NodeId, from: NodeId, seq: u64, hello: bool) {
        let est = &self.cfg.estimators;
        let link = self.nodes[at.index()].links_in.entry(from).or_insert_with(|| LinkIn {
            prr: PrrEstimator::new(est.prr_prior, est.prr_window, est.prr_beta),
            data: SeqGapTracker::default(),
            hello: SeqGapTracker::default(),
        });
        let tracker = if hello { &mut link.hello } else { &mut link.data };
        if let Some(missed) = tracker.observe(seq) {
            for _ in 0..missed {
                link.prr.record_missed();
            }
            link.prr.record_received();
        }
    }

    // ----- forwarding -----------------------------------------------------

    fn try_serve(&mut self, x: NodeId) {
        loop {
            let now = self.now;
            let bw = self.cfg.radio.bandwidth_bps;
            let n = &mut self.nodes[x.index()];
            if !n.alive || n.mac.is_some() {
                return;
            }
            let Some(d) = n.queue.dequeue_next(now) else {
                return;
            };
            let _ = n.delays.dq_update(d.packet.class, d.wait.max(0.0));
            let mut packet = d.packet;
            let lag = match update_lag_time(packet.lag_time, d.enqueue_time, now, packet.payload_size, bw) {
                Ok(lt) => lt,
                Err(Error::DeadlineExpired(lt)) => {
                    if packet.class.is_deadline_bound() && self.cfg.routing.protocol.enforces_deadlines() {
                        self.log(Some(x), "expired", Some(packet.id), format!("lt={lt:.6}"));
                        self.lose_instance(packet.id, DropCause::Deadline);
                        continue;
                    }
                    lt
                }
                Err(e) => unreachable!("update_lag_time only signals expiry: {e}"),
            };
            packet.lag_time = lag;

            let n = &self.nodes[x.index()];
            let local = LocalView {
                id: x,
                position: self.topo.position(x),
                delays: &n.delays,
                range: self.cfg.radio.range,
                alpha: self.cfg.radio.path_loss_exponent,
                cost_tx: self.cfg.energy.tx,
            };
            let req = RouteRequest {
                class: packet.class,
                lag_time: lag.max(1e-9),
                destination: packet.destination,
                destination_position: self.topo.position(packet.destination),
                now,
            };
            match decide(&self.cfg.routing, &local, &n.table, &req) {
                Ok(dec) => {
                    if dec.missed_velocity {
                        packet.missed_velocity = true;
                        self.ledger.missed_velocity += 1;
                    }
                    self.log(
                        Some(x),
                        "route",
                        Some(packet.id),
                        format!(
                            "next={} via={} lt={:.6}",
                            dec.next_hop.0,
                            dec.via.map_or("-".to_string(), |z| z.0.to_string()),
                            lag
                        ),
                    );
                    self.nodes[x.index()].mac = Some(InFlight {
                        packet,
                        next_hop: dec.next_hop,
                        attempt: 0,
                        t_s: now,
                        frame_in_air: false,
                    });
                    self.start_attempt(x);
                    return;
                }
                Err(_) => {
                    self.log(Some(x), "void", Some(packet.id), "");
                    self.lose_instance(packet.id, DropCause::Void);
                }
            }
        }
    }

    fn start_attempt(&mut self, x: NodeId) {
        let m = self.nodes[x.index()].mac.as_mut().expect("MAC busy");
        m.frame_in_air = true;
        let y = m.next_hop;
        let attempt = m.attempt;
        let packet = Box::new(m.packet.clone());
        let seq = {
            let s = self.nodes[x.index()].data_seq.entry(y).or_insert(0);
            *s += 1;
            *s
        };
        let d = dist(self.topo.position(x), self.topo.position(y));
        let r = &self.cfg.radio;
        let cost = tx_power_cost(d.max(1e-9), r.range, r.path_loss_exponent, self.cfg.energy.tx)
            .map(Energy::from_joules)
            .unwrap_or(self.tx_cost);
        let backoff = self.rng.gen::<f64>() * self.cfg.mac.contention_window;
        let t_end = self.now + backoff + self.serialization(packet.payload_size);
        self.ledger.data_transmissions += 1;
        self.log(
            Some(x),
            "transmit",
            Some(packet.id),
            format!("to={} attempt={attempt}", y.0),
        );
        self.schedule(
            t_end,
            EventKind::TransmissionComplete {
                from: x,
                to: y,
                packet,
                attempt,
                seq,
            },
        );
        // The frame is on the air even if this drains the battery.
        self.charge(x, cost, false);
    }

    fn frame_landed(&mut self, x: NodeId, id: PacketId, attempt: u32) {
        let n = &mut self.nodes[x.index()];
        let matches = matches!(&n.mac, Some(m) if m.packet.id == id && m.attempt == attempt);
        if !matches {
            return;
        }
        if n.alive {
            n.mac.as_mut().unwrap().frame_in_air = false;
        } else {
            // Sender died while the frame was out; its copy ends here.
            n.mac = None;
            self.lose_instance(id, DropCause::DeadNode);
        }
    }

    fn on_transmission_complete(&mut self, x: NodeId, y: NodeId, packet: Box<Packet>, attempt: u32, seq: u64) {
        let delivered = self.nodes[y.index()].alive && self.rng.gen::<f64>() < self.link_p(x, y);
        let id = packet.id;
        if delivered {
            let t = self.now + self.propagation(x, y);
            self.schedule(
                t,
                EventKind::PacketArrival {
                    from: x,
                    to: y,
                    packet,
                    attempt,
                    seq,
                },
            );
        } else {
            if self.nodes[x.index()].alive {
                self.log(Some(x), "lost", Some(id), format!("to={}", y.0));
            }
            let t = self.now + self.ack_time() + 2.0 * self.propagation(x, y) + self.cfg.mac.ack_timeout_slack;
            self.schedule(
                t,
                EventKind::AckTimeout {
                    node: x,
                    packet: id,
                    attempt,
                },
            );
            self.frame_landed(x, id, attempt);
        }
    }

    fn on_arrival(&mut self, x: NodeId, y: NodeId, mut packet: Packet, attempt: u32, seq: u64) -> Result<()> {
        let id = packet.id;
        let timeout_at = self.now + self.ack_time() + self.propagation(x, y) + self.cfg.mac.ack_timeout_slack;
        if !self.nodes[y.index()].alive || self.charge(y, self.rx_cost, false) {
            self.schedule(
                timeout_at,
                EventKind::AckTimeout {
                    node: x,
                    packet: id,
                    attempt,
                },
            );
            self.frame_landed(x, id, attempt);
            return Ok(());
        }
        self.observe_link(y, x, seq, false);

        let ack_ok = self.rng.gen::<f64>() < self.link_p(y, x);
        let yn = &self.nodes[y.index()];
        let info = AckInfo {
            sender: y,
            prr_reverse: yn.links_in.get(&x).map(|l| l.prr.prr()),
            dq: yn.delays.dq_all(),
            energy: yn.energy.residual().joules(),
        };
        self.ledger.control_bytes += info.wire_size(&self.cfg.neighborhood.wire) as u64;
        if ack_ok {
            let t = self.now + self.ack_time() + self.propagation(y, x);
            self.schedule(
                t,
                EventKind::AckReceived {
                    node: x,
                    packet: id,
                    attempt,
                    info,
                },
            );
        } else {
            self.schedule(
                timeout_at,
                EventKind::AckTimeout {
                    node: x,
                    packet: id,
                    attempt,
                },
            );
        }

        if self.nodes[y.index()].seen.insert(id) {
            packet.hop_count += 1;
            packet.trace.push((y, self.now));
            self.copies.get_mut(&id).expect("known copy").holders += 1;
            self.log(
                Some(y),
                "receive",
                Some(id),
                format!("from={} hop={}", x.0, packet.hop_count),
            );
            if y == packet.destination {
                self.deliver(&packet)?;
            } else {
                self.enqueue_at(y, packet);
            }
        } else {
            self.log(Some(y), "duplicate", Some(id), format!("from={}", x.0));
        }
        self.frame_landed(x, id, attempt);
        // ACK transmission; charged last so a dying receiver still hands the packet on.
        self.charge(y, self.idle_cost, true);
        Ok(())
    }

    fn in_flight_matches(&self, x: NodeId, id: PacketId, attempt: u32) -> bool {
        let n = &self.nodes[x.index()];
        n.alive && matches!(&n.mac, Some(m) if m.packet.id == id && m.attempt == attempt && !m.frame_in_air)
    }

    fn on_ack(&mut self, x: NodeId, id: PacketId, attempt: u32, info: AckInfo) {
        if !self.in_flight_matches(x, id, attempt) {
            return;
        }
        let now = self.now;
        let ack_bytes = self.cfg.mac.ack_bytes;
        let bw = self.cfg.radio.bandwidth_bps;
        let n = &mut self.nodes[x.index()];
        let m = n.mac.take().expect("checked");
        n.table.process_ack(&info, now);
        let _ = n.delays.dt_update(m.next_hop, m.t_s, now, ack_bytes, bw);
        self.log(Some(x), "ack", Some(id), format!("from={}", m.next_hop.0));
        self.release(id, None);
        if !self.charge(x, self.idle_cost, true) {
            self.try_serve(x);
        }
    }

    fn on_ack_timeout(&mut self, x: NodeId, id: PacketId, attempt: u32) {
        if !self.in_flight_matches(x, id, attempt) {
            return;
        }
        let n = &mut self.nodes[x.index()];
        let m = n.mac.as_mut().expect("checked");
        if m.attempt < self.cfg.mac.max_retries {
            m.attempt += 1;
            self.start_attempt(x);
        } else {
            n.mac = None;
            self.log(Some(x), "give_up", Some(id), "");
            self.lose_instance(id, DropCause::RetriesExhausted);
            self.try_serve(x);
        }
    }
}
