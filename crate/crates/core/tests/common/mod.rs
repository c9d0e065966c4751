//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here recomputes the library's answers from raw geometry and
//! per-node attributes, without going through the library's set logic.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tdthr::estimators::DelayEstimator;
use tdthr::neighborhood::{HelloMessage, LocalView, NeighborTable, TwoHopEntry};
use tdthr::types::PerClass;
use tdthr::{dist, NodeId, PacketClass, Position};

pub const RANGE: f64 = 100.0;
pub const ALPHA: f64 = 2.0;
pub const COST_TX: f64 = 0.0522;
pub const EXPIRY: f64 = 12.5;
pub const NOW: f64 = 20.0;

const PRRS: [f64; 4] = [0.5, 0.8, 0.9, 1.0];
const ENERGIES: [f64; 3] = [1.0, 1.5, 2.0];
const DQS: [f64; 4] = [0.0, 0.005, 0.01, 0.02];
const DTS: [f64; 3] = [0.005, 0.01, 0.02];
/// When each neighbor was last heard; the first is already expired at `NOW`.
const HEARD: [f64; 3] = [0.0, 7.5, 20.0];

/// A random field with per-node and per-link attributes drawn from small
/// discrete sets, so that ties are common.
#[derive(Debug, Clone)]
pub struct Net {
    pub pos: Vec<Position>,
    pub energy: Vec<f64>,
    pub dq: Vec<[f64; 4]>,
    /// `prr[a][b]`: reception ratio of the link a → b.
    pub prr: Vec<Vec<f64>>,
    /// `dt[a][b]`: a's transmission delay estimate toward b.
    pub dt: Vec<Vec<f64>>,
    /// Time the observer last heard each node.
    pub heard: Vec<f64>,
    pub dest: Position,
}

impl Net {
    pub fn random(rng: &mut ChaCha8Rng) -> Net {
        let n = rng.gen_range(2..=50);
        let side = rng.gen_range(150.0..450.0);
        let grid = rng.gen_bool(0.5);
        let mut pos: Vec<Position> = Vec::with_capacity(n);
        while pos.len() < n {
            let p = if grid {
                let cells = (side / 10.0) as u32;
                Position::new(
                    10.0 * rng.gen_range(0..=cells) as f64,
                    10.0 * rng.gen_range(0..=cells) as f64,
                )
            } else {
                Position::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side))
            };
            if pos.iter().all(|q| dist(*q, p) > 1e-6) {
                pos.push(p);
            }
        }
        let pick = |rng: &mut ChaCha8Rng, set: &[f64]| *set.choose(rng).unwrap();
        let energy = (0..n).map(|_| pick(rng, &ENERGIES)).collect();
        let dq = (0..n).map(|_| [0; 4].map(|_| pick(rng, &DQS))).collect();
        let prr = (0..n).map(|_| (0..n).map(|_| pick(rng, &PRRS)).collect()).collect();
        let dt = (0..n).map(|_| (0..n).map(|_| pick(rng, &DTS)).collect()).collect();
        let heard = (0..n).map(|_| pick(rng, &HEARD)).collect();
        let dest = if rng.gen_bool(0.5) {
            pos[rng.gen_range(0..n)]
        } else {
            Position::new(rng.gen_range(-50.0..side + 50.0), rng.gen_range(-50.0..side + 50.0))
        };
        Net {
            pos,
            energy,
            dq,
            prr,
            dt,
            heard,
            dest,
        }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    /// Ground-truth radio neighbors of `a`.
    pub fn radio(&self, a: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&b| b != a && dist(self.pos[a], self.pos[b]) <= RANGE)
            .collect()
    }

    /// The beacon node `y` would send.
    pub fn hello(&self, y: usize) -> HelloMessage {
        let around = self.radio(y);
        HelloMessage {
            sender: NodeId(y as u32),
            seq: 0,
            position: self.pos[y],
            energy: self.energy[y],
            dq: PerClass(self.dq[y]),
            reverse_prr: around.iter().map(|&w| (NodeId(w as u32), self.prr[w][y])).collect(),
            one_hop: around
                .iter()
                .map(|&w| TwoHopEntry {
                    id: NodeId(w as u32),
                    position: self.pos[w],
                    dq: PerClass(self.dq[w]),
                    dt: self.dt[y][w],
                    prr: self.prr[y][w],
                    energy: self.energy[w],
                })
                .collect(),
        }
    }

    /// Observer `x`'s table after hearing each radio neighbor once at its `heard` time.
    pub fn table(&self, x: usize) -> NeighborTable {
        let mut t = NeighborTable::new(NodeId(x as u32), EXPIRY);
        for y in self.radio(x) {
            assert!(t.process_hello(&self.hello(y), self.heard[y]));
        }
        t
    }

    /// Observer `x`'s delay estimator, holding `dq[x]` and `dt[x][y]` exactly.
    pub fn delays(&self, x: usize) -> DelayEstimator {
        // gamma = 0 makes every estimate equal its latest sample.
        let mut d = DelayEstimator::new(0.0, 0.0, 0.01);
        for c in PacketClass::ALL {
            d.dq_update(c, self.dq[x][c.index()]).unwrap();
        }
        for y in self.radio(x) {
            d.dt_update(NodeId(y as u32), 0.0, self.dt[x][y], 0, 250_000.0).unwrap();
        }
        d
    }

    pub fn view<'a>(&self, x: usize, delays: &'a DelayEstimator) -> LocalView<'a> {
        LocalView {
            id: NodeId(x as u32),
            position: self.pos[x],
            delays,
            range: RANGE,
            alpha: ALPHA,
            cost_tx: COST_TX,
        }
    }

    fn fresh(&self, y: usize) -> bool {
        NOW - self.heard[y] <= EXPIRY
    }

    pub fn n1(&self, x: usize) -> BTreeSet<NodeId> {
        self.radio(x)
            .into_iter()
            .filter(|&y| self.fresh(y))
            .map(|y| NodeId(y as u32))
            .collect()
    }

    pub fn n2(&self, x: usize) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for y in self.radio(x).into_iter().filter(|&y| self.fresh(y)) {
            for z in self.radio(y) {
                if z != x {
                    out.insert(NodeId(z as u32));
                }
            }
        }
        out
    }

    fn progress(&self, from: usize, to: usize) -> f64 {
        dist(self.pos[from], self.dest) - dist(self.pos[to], self.dest)
    }

    pub fn f1(&self, x: usize) -> BTreeSet<NodeId> {
        self.radio(x)
            .into_iter()
            .filter(|&y| self.fresh(y) && self.progress(x, y) > 0.0)
            .map(|y| NodeId(y as u32))
            .collect()
    }

    /// Every favorable pair with its offered velocity and ranking attributes.
    pub fn f2(&self, x: usize, class: PacketClass) -> Vec<RefPair> {
        let c = class.index();
        let mut out = Vec::new();
        for y in self.radio(x) {
            if !self.fresh(y) || self.progress(x, y) <= 0.0 {
                continue;
            }
            for z in self.radio(y) {
                if z == x || self.progress(y, z) <= 0.0 {
                    continue;
                }
                let progress = dist(self.pos[x], self.dest) - dist(self.pos[z], self.dest);
                let den = self.dq[x][c] + self.dt[x][y] + self.dq[y][c] + self.dt[y][z];
                let d = dist(self.pos[x], self.pos[y]);
                out.push(RefPair {
                    y: NodeId(y as u32),
                    z: NodeId(z as u32),
                    progress,
                    velocity: progress / den,
                    prr_xy: self.prr[x][y],
                    prr_path: self.prr[x][y] * self.prr[y][z],
                    power: self.energy[y] / (COST_TX * (d / RANGE).powf(ALPHA)),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefPair {
    pub y: NodeId,
    pub z: NodeId,
    pub progress: f64,
    pub velocity: f64,
    pub prr_xy: f64,
    pub prr_path: f64,
    pub power: f64,
}

/// Which reception ratio ranks critical pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    FirstHop,
    Path,
}

/// Next hop chosen by Algorithm 1, or `None` when no pair is fast enough.
pub fn algorithm1(class: PacketClass, pairs: &[RefPair], v_req: f64, scope: Scope) -> Option<NodeId> {
    let s_req: Vec<&RefPair> = pairs.iter().filter(|p| p.velocity >= v_req).collect();
    match s_req.len() {
        0 => return None,
        1 => return Some(s_req[0].y),
        _ => {}
    }
    let best_power = |set: &[&RefPair]| {
        let top = set.iter().map(|p| p.power).fold(f64::NEG_INFINITY, f64::max);
        set.iter().filter(|p| p.power == top).map(|p| p.y).min()
    };
    match class {
        PacketClass::DelayResponsive => best_power(&s_req),
        PacketClass::Critical => {
            let prr = |p: &RefPair| match scope {
                Scope::FirstHop => p.prr_xy,
                Scope::Path => p.prr_path,
            };
            let top = s_req.iter().map(|p| prr(p)).fold(f64::NEG_INFINITY, f64::max);
            let s_c: Vec<&RefPair> = s_req.iter().copied().filter(|p| prr(p) == top).collect();
            if s_c.len() == 1 {
                Some(s_c[0].y)
            } else {
                best_power(&s_c)
            }
        }
        other => panic!("{other:?} is not velocity-routed"),
    }
}

/// Compares the library's neighbor sets with the brute-force ones on
/// `topologies` random fields, every node as observer. Returns one line per mismatch.
pub fn neighborhood_mismatches(seed: u64, topologies: usize) -> Vec<String> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for t in 0..topologies {
        let net = Net::random(&mut rng);
        for x in 0..net.len() {
            let table = net.table(x);
            let delays = net.delays(x);
            let view = net.view(x, &delays);
            let mut check = |what: &str, ok: bool| {
                if !ok {
                    bad.push(format!("topology {t}, node {x}: {what} differs"));
                }
            };
            check("N1", table.one_hop_set(NOW) == net.n1(x));
            check("N2", table.two_hop_set(NOW) == net.n2(x));
            let f1: BTreeSet<NodeId> = table.favorable_one_hop(net.pos[x], net.dest, NOW).into_iter().collect();
            check("F1", f1 == net.f1(x));
            for class in PacketClass::ALL {
                let mut got: Vec<RefPair> = table
                    .favorable_pairs(&view, net.dest, class, NOW)
                    .into_iter()
                    .map(|p| RefPair {
                        y: p.y,
                        z: p.z,
                        progress: p.progress,
                        velocity: p.velocity,
                        prr_xy: p.prr_xy,
                        prr_path: p.prr_path,
                        power: p.power_score,
                    })
                    .collect();
                let mut want = net.f2(x, class);
                got.sort_by_key(|p| (p.y, p.z));
                want.sort_by_key(|p| (p.y, p.z));
                check("F2", got == want);
            }
        }
    }
    bad
}

/// Runs `trials` random snapshots through `select_next_hop` and the reference
/// Algorithm 1 under both critical scopes. Returns one line per mismatch and
/// the number of snapshots that had at least two qualifying pairs.
pub fn algorithm1_mismatches(seed: u64, trials: usize) -> (Vec<String>, usize) {
    use rand::SeedableRng;
    use tdthr::error::Error;
    use tdthr::forwarding::{select_next_hop, CriticalPrrScope, VelocityContext};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let mut contested = 0;
    let mut done = 0;
    while done < trials {
        let net = Net::random(&mut rng);
        let x = rng.gen_range(0..net.len());
        let class = if rng.gen_bool(0.5) {
            PacketClass::Critical
        } else {
            PacketClass::DelayResponsive
        };
        let want_pairs = net.f2(x, class);
        if want_pairs.is_empty() {
            continue;
        }
        done += 1;
        let table = net.table(x);
        let delays = net.delays(x);
        let view = net.view(x, &delays);
        let pairs = table.favorable_pairs(&view, net.dest, class, NOW);
        let d = dist(net.pos[x], net.dest);
        // A lag time that puts the requirement at, above or below some pair's velocity.
        let pivot = want_pairs.choose(&mut rng).unwrap().velocity;
        let v_target = pivot * *[0.5, 1.0, 1.0, 1.5].choose(&mut rng).unwrap();
        let lt = d / v_target;
        let v_req = d / lt;
        if want_pairs.iter().filter(|p| p.velocity >= v_req).count() > 1 {
            contested += 1;
        }
        let ctx = VelocityContext::new(d, lt, pairs);
        let f1 = net.f1(x);
        for (scope, ref_scope) in [
            (CriticalPrrScope::OneHop, Scope::FirstHop),
            (CriticalPrrScope::TwoHop, Scope::Path),
        ] {
            let got = match select_next_hop(class, &ctx, scope) {
                Ok(y) => Some(y),
                Err(Error::NoQualifyingPair) => None,
                Err(e) => {
                    bad.push(format!("trial {done}: unexpected error {e}"));
                    continue;
                }
            };
            let want = algorithm1(class, &want_pairs, v_req, ref_scope);
            if got != want {
                bad.push(format!(
                    "trial {done} {class:?} {ref_scope:?}: got {got:?}, want {want:?}"
                ));
            }
            if let Some(y) = got {
                if !f1.contains(&y) {
                    bad.push(format!("trial {done}: {y} is not a favorable neighbor"));
                }
            }
        }
    }
    (bad, contested)
}

/// Reference three-queue controller: ids only, timers as absolute expiries.
#[derive(Debug, Default)]
struct QueueModel {
    queues: [std::collections::VecDeque<(u64, Option<f64>)>; 3],
    accepted: u64,
    rejected: u64,
    dequeued: u64,
    promoted: u64,
    drained: u64,
}

fn queue_slot(class: PacketClass) -> usize {
    match class {
        PacketClass::Critical => 0,
        PacketClass::DelayResponsive => 1,
        PacketClass::ReliabilityResponsive | PacketClass::Regular => 2,
    }
}

/// Drives the library queue bank and the reference model with `sequences`
/// random event sequences and returns one line per disagreement.
pub fn queue_violations(seed: u64, sequences: usize) -> Vec<String> {
    use rand::SeedableRng;
    use tdthr::queueing::{PromotionRule, QueueBank, QueueKind};
    use tdthr::Packet;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let kinds = [QueueKind::Critical, QueueKind::Delay, QueueKind::Reliability];
    for s in 0..sequences {
        let capacity = rng.gen_range(1..6);
        let rule = PromotionRule {
            lag_fraction: 0.5,
            floor: 0.01,
        };
        let mut bank = QueueBank::priority(capacity, rule);
        let mut model = QueueModel::default();
        let mut timers: Vec<(u64, f64)> = Vec::new();
        let mut now = 0.0;
        let mut next_id = 0u64;
        let steps = rng.gen_range(10..80);
        for step in 0..steps {
            let mut fail = |msg: String| bad.push(format!("sequence {s} step {step}: {msg}"));
            now += rng.gen_range(0.0..0.02);
            match rng.gen_range(0..100) {
                0..=44 => {
                    let class = *PacketClass::ALL.choose(&mut rng).unwrap();
                    let lag = rng.gen_range(0.0..0.3);
                    next_id += 1;
                    let mut p = Packet::new(next_id, class, NodeId(0), NodeId(1), 0.3, 150, now);
                    p.lag_time = lag;
                    let slot = queue_slot(class);
                    let want_timer = (slot != 0).then(|| now + (lag * 0.5).max(0.01));
                    let room = model.queues[slot].len() < capacity;
                    match bank.enqueue(p, now) {
                        Ok(timer) if room => {
                            if timer != want_timer {
                                fail(format!("timer {timer:?}, want {want_timer:?}"));
                            }
                            model.queues[slot].push_back((next_id, want_timer));
                            model.accepted += 1;
                            if let Some(t) = want_timer {
                                timers.push((next_id, t));
                            }
                        }
                        Err(_) if !room => model.rejected += 1,
                        other => fail(format!("enqueue gave {:?} with room = {room}", other.is_ok())),
                    }
                }
                45..=79 => {
                    let want = model.queues.iter_mut().find_map(|q| q.pop_front());
                    let got = bank.dequeue_next(now);
                    if want.is_some() {
                        model.dequeued += 1;
                    }
                    if got.as_ref().map(|d| d.packet.id) != want.map(|w| w.0) {
                        fail(format!("dequeued {:?}, want {want:?}", got.map(|d| d.packet.id)));
                    }
                }
                80..=97 if !timers.is_empty() => {
                    let (id, deadline) = timers.swap_remove(rng.gen_range(0..timers.len()));
                    let mut want = false;
                    for slot in 1..3 {
                        if let Some(i) = model.queues[slot].iter().position(|e| *e == (id, Some(deadline))) {
                            model.queues[slot].remove(i);
                            model.queues[0].push_back((id, None));
                            model.promoted += 1;
                            want = true;
                        }
                    }
                    if bank.on_timer_expire(id, deadline) != want {
                        fail(format!("timer for {id} fired with the wrong effect (want {want})"));
                    }
                }
                _ => {
                    let n = bank.drain().len() as u64;
                    let held: u64 = model.queues.iter().map(|q| q.len() as u64).sum();
                    model.queues.iter_mut().for_each(|q| q.clear());
                    model.drained += held;
                    if n != held {
                        fail(format!("drained {n}, want {held}"));
                    }
                }
            }
            for (slot, kind) in kinds.iter().enumerate() {
                let got: Vec<u64> = bank.queue(*kind).iter().map(|e| e.packet.id).collect();
                let want: Vec<u64> = model.queues[slot].iter().map(|e| e.0).collect();
                if got != want {
                    bad.push(format!(
                        "sequence {s} step {step}: {kind:?} holds {got:?}, want {want:?}"
                    ));
                }
            }
            let c = bank.counters();
            let counts = (c.accepted, c.rejected, c.dequeued, c.promoted, c.drained);
            let want = (
                model.accepted,
                model.rejected,
                model.dequeued,
                model.promoted,
                model.drained,
            );
            if counts != want || !bank.is_balanced() {
                bad.push(format!("sequence {s} step {step}: counters {counts:?}, want {want:?}"));
            }
        }
    }
    bad
}

/// Source and one sink `distance` meters apart, nothing else.
pub fn two_nodes(distance: f64) -> tdthr::sim::SimConfig {
    let mut cfg = tdthr::sim::SimConfig::desk();
    cfg.field.width = distance;
    cfg.field.height = 1.0;
    cfg.field.node_count = 2;
    cfg.field.density = None;
    cfg.sinks = vec![Position::new(0.0, 0.0)];
    cfg.traffic.source = Some(Position::new(distance, 0.0));
    cfg
}

/// Distance at which the default distance-degraded link delivers with probability `p`.
pub fn distance_for(p: f64) -> f64 {
    RANGE * (1.0 - p).powf(0.25)
}

/// Checks that every battery drained exactly what the node was charged and that
/// the per-node charges add up to the ledger's total.
pub fn energy_balance(out: &tdthr::sim::RunOutput) -> Result<(), String> {
    use tdthr::energy::Energy;
    let spent: Energy = out.batteries.iter().map(|b| b.spent()).sum();
    if spent != out.ledger.total_energy_spent {
        return Err(format!(
            "nodes spent {spent}, ledger says {}",
            out.ledger.total_energy_spent
        ));
    }
    for (i, b) in out.batteries.iter().enumerate().filter(|(_, b)| !b.is_mains()) {
        if b.initial() - b.residual() != b.spent() {
            return Err(format!(
                "node {i}: drained {} but charged {}",
                b.initial() - b.residual(),
                b.spent()
            ));
        }
    }
    Ok(())
}

/// Lines in `trace` where a node acts after its own death line.
pub fn activity_after_death(trace: &str) -> Vec<String> {
    let mut dead = BTreeSet::new();
    let mut bad = Vec::new();
    for line in trace.lines() {
        let mut f = line.split_whitespace();
        let (_, node, kind) = (f.next(), f.next().unwrap_or("-"), f.next().unwrap_or(""));
        if kind == "death" {
            dead.insert(node.to_string());
        } else if dead.contains(node) {
            bad.push(line.to_string());
        }
    }
    bad
}

pub fn table3_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/table3.toml")
}

/// Every published simulation parameter, checked against `cfg`.
pub fn table3_mismatches(cfg: &tdthr::sim::SimConfig) -> Vec<String> {
    use tdthr::sim::LinkModel;
    let mut bad = Vec::new();
    let mut eq = |what: &str, got: f64, want: f64| {
        if got != want {
            bad.push(format!("{what}: {got} != {want}"));
        }
    };
    eq("number of nodes", cfg.field.node_count as f64, 900.0);
    eq("field width", cfg.field.width, 1800.0);
    eq("field height", cfg.field.height, 1800.0);
    eq("payload size", cfg.traffic.payload_bytes as f64, 150.0);
    eq("CBR rate", cfg.traffic.cbr_rate, 1000.0);
    eq(
        "regular rate",
        cfg.traffic.regular_rate(),
        1.0 - cfg.traffic.critical_rate,
    );
    eq("range", cfg.radio.range, 100.0);
    eq("initial energy", cfg.energy.initial, 2.0);
    eq("transmit", cfg.energy.tx, 0.0522);
    eq("receive", cfg.energy.rx, 0.0591);
    eq("sleep", cfg.energy.sleep, 0.00006);
    eq("idle", cfg.energy.idle, 0.000003);
    eq("free space exponent", cfg.radio.path_loss_exponent, 2.0);
    eq("hello period", cfg.neighborhood.hello_period, 5.0);
    eq("WMEWMA window", cfg.estimators.prr_window as f64, 30.0);
    eq("WMEWMA beta", cfg.estimators.prr_beta, 0.6);
    eq("EWMA gamma", cfg.estimators.gamma, 0.5);
    eq("deadline", cfg.traffic.deadline, 0.3);
    if !(0.0..=1.0).contains(&cfg.traffic.critical_rate) {
        bad.push(format!("critical rate {} outside 0 to 1", cfg.traffic.critical_rate));
    }
    if !matches!(cfg.link, LinkModel::DistanceDegraded { .. } | LinkModel::Perfect) {
        bad.push("unknown link model".into());
    }
    let sinks = cfg.sink_positions();
    if sinks != [Position::new(0.0, 0.0), Position::new(1800.0, 1800.0)] {
        bad.push(format!("sinks at {sinks:?}"));
    }
    if cfg.source_position() != Position::new(900.0, 900.0) {
        bad.push(format!("source at {:?}", cfg.source_position()));
    }
    bad
}

/// Number of delivered packets of `class` in `trace` and their summed hop counts.
pub fn delivered_hops(trace: &str, class: PacketClass) -> (u64, u64) {
    let mut of_class = BTreeSet::new();
    let (mut n, mut hops) = (0, 0);
    for line in trace.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.get(2) {
            Some(&"generate") if f.get(4) == Some(&format!("class={class}").as_str()) => {
                of_class.insert(f[3].to_string());
            }
            Some(&"deliver") if of_class.contains(f[3]) => {
                n += 1;
                hops += f[4].trim_start_matches("hops=").parse::<u64>().unwrap();
            }
            _ => {}
        }
    }
    (n, hops)
}
