//! One- and two-hop neighbor tables built from HELLO beacons and
//! ACK-piggybacked state, and the favorable-forwarder sets derived from them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::energy::tx_power_cost;
use crate::estimators::DelayEstimator;
use crate::geometry::{dist, Position};
use crate::types::{NodeId, PacketClass, PerClass};

/// Byte sizes used to account HELLO and ACK overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WireLayout {
    pub sender_id: u32,
    pub position: u32,
    pub energy: u32,
    pub dq_per_class: u32,
    pub reverse_prr_entry: u32,
    pub one_hop_entry: u32,
    pub ack_base: u32,
}

impl Default for WireLayout {
    fn default() -> Self {
        Self {
            sender_id: 4,
            position: 8,
            energy: 4,
            dq_per_class: 4,
            reverse_prr_entry: 6,
            one_hop_entry: 26,
            ack_base: 12,
        }
    }
}

/// What a node reports about one of its own one-hop neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoHopEntry {
    pub id: NodeId,
    pub position: Position,
    pub dq: PerClass<f64>,
    /// Reporter's transmission delay estimate toward this neighbor.
    pub dt: f64,
    /// Reception ratio of the reporter → neighbor link, as the neighbor told the reporter.
    pub prr: f64,
    pub energy: f64,
}

/// Periodic beacon.
#[derive(Debug, Clone, PartialEq)]
pub struct HelloMessage {
    pub sender: NodeId,
    pub seq: u64,
    pub position: Position,
    pub energy: f64,
    pub dq: PerClass<f64>,
    /// `(x, prr_xs)`: the sender's estimate of the link from `x` into the sender.
    pub reverse_prr: Vec<(NodeId, f64)>,
    pub one_hop: Vec<TwoHopEntry>,
}

impl HelloMessage {
    pub fn wire_size(&self, layout: &WireLayout) -> u32 {
        layout.sender_id
            + layout.position
            + layout.energy
            + 4 * layout.dq_per_class
            + self.reverse_prr.len() as u32 * layout.reverse_prr_entry
            + self.one_hop.len() as u32 * layout.one_hop_entry
    }

    fn is_well_formed(&self) -> bool {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        self.position.is_finite()
            && self.energy.is_finite()
            && self.energy >= 0.0
            && self.dq.0.iter().all(|d| d.is_finite() && *d >= 0.0)
            && self.reverse_prr.iter().all(|(_, p)| prob(*p))
            && self.one_hop.iter().all(|e| {
                e.position.is_finite()
                    && prob(e.prr)
                    && e.dt.is_finite()
                    && e.dt >= 0.0
                    && e.dq.0.iter().all(|d| d.is_finite() && *d >= 0.0)
            })
    }
}

/// State of the ACKing node piggybacked on a link-layer ACK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AckInfo {
    pub sender: NodeId,
    /// The ACKing node's estimate of the link from the data sender into it.
    pub prr_reverse: Option<f64>,
    pub dq: PerClass<f64>,
    pub energy: f64,
}

impl AckInfo {
    pub fn wire_size(&self, layout: &WireLayout) -> u32 {
        layout.ack_base + layout.energy + 4 * layout.dq_per_class + layout.reverse_prr_entry
    }
}

/// Everything the owner knows about one neighbor `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRecord {
    pub neighbor: NodeId,
    pub position: Position,
    /// Owner → neighbor reception ratio as last reported by the neighbor.
    pub prr: f64,
    pub dq: PerClass<f64>,
    pub energy: f64,
    pub last_heard: f64,
    pub two_hop: Vec<TwoHopEntry>,
}

/// A first hop `y` and the advisory second hop `z` toward destination `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwarderPair {
    pub y: NodeId,
    pub z: NodeId,
    /// `dist(x,D) − dist(z,D)`.
    pub progress: f64,
    /// `dist(x,D) − dist(y,D)`.
    pub progress_y: f64,
    /// `dq_x + dt_xy + dq_y + dt_yz` for the packet's class.
    pub denominator: f64,
    pub velocity: f64,
    pub prr_xy: f64,
    pub prr_yz: f64,
    pub prr_path: f64,
    pub energy_y: f64,
    /// Transmission power cost of the `x → y` hop.
    pub tx_cost: f64,
    /// `energy_y / tx_cost`.
    pub power_score: f64,
}

/// The owner's local state needed to evaluate forwarders.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    pub id: NodeId,
    pub position: Position,
    pub delays: &'a DelayEstimator,
    pub range: f64,
    pub alpha: f64,
    pub cost_tx: f64,
}

impl LocalView<'_> {
    /// Transmission power cost toward a neighbor at `position`; distances are
    /// clamped into the radio range so a stale report cannot poison the score.
    pub fn tx_cost_to(&self, position: Position) -> f64 {
        let d = dist(self.position, position).clamp(1e-9, self.range);
        tx_power_cost(d, self.range, self.alpha, self.cost_tx).unwrap_or(self.cost_tx)
    }
}

/// One node's view of its neighborhood.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    owner: NodeId,
    expiry: f64,
    records: BTreeMap<NodeId, NeighborRecord>,
    malformed: u64,
}

impl NeighborTable {
    pub fn new(owner: NodeId, expiry: f64) -> Self {
        Self {
            owner,
            expiry,
            records: BTreeMap::new(),
            malformed: 0,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn malformed(&self) -> u64 {
        self.malformed
    }

    fn fresh(&self, r: &NeighborRecord, now: f64) -> bool {
        now - r.last_heard <= self.expiry
    }

    pub fn record(&self, y: NodeId, now: f64) -> Option<&NeighborRecord> {
        self.records.get(&y).filter(|r| self.fresh(r, now))
    }

    pub fn records(&self, now: f64) -> impl Iterator<Item = &NeighborRecord> + '_ {
        self.records.values().filter(move |r| self.fresh(r, now))
    }

    /// Drops records not refreshed within the expiry threshold.
    pub fn evict_expired(&mut self, now: f64) -> Vec<NodeId> {
        let expiry = self.expiry;
        let gone: Vec<NodeId> = self
            .records
            .values()
            .filter(|r| now - r.last_heard > expiry)
            .map(|r| r.neighbor)
            .collect();
        for y in &gone {
            self.records.remove(y);
        }
        gone
    }

    /// Upserts the sender's record from a beacon. Malformed beacons are
    /// counted and ignored; returns whether the beacon was accepted.
    pub fn process_hello(&mut self, hello: &HelloMessage, now: f64) -> bool {
        if hello.sender == self.owner || !hello.is_well_formed() {
            self.malformed += 1;
            return false;
        }
        let owner = self.owner;
        let prr = hello.reverse_prr.iter().find(|(x, _)| *x == owner).map(|(_, p)| *p);
        let two_hop: Vec<TwoHopEntry> = hello
            .one_hop
            .iter()
            .filter(|e| e.id != owner && e.id != hello.sender)
            .cloned()
            .collect();
        let rec = self.records.entry(hello.sender).or_insert_with(|| NeighborRecord {
            neighbor: hello.sender,
            position: hello.position,
            prr: 1.0,
            dq: hello.dq,
            energy: hello.energy,
            last_heard: now,
            two_hop: Vec::new(),
        });
        rec.position = hello.position;
        if let Some(p) = prr {
            rec.prr = p;
        }
        rec.dq = hello.dq;
        rec.energy = hello.energy;
        rec.last_heard = rec.last_heard.max(now);
        rec.two_hop = two_hop;
        true
    }

    /// Applies the ACKing node's piggybacked state. Only known neighbors are
    /// updated; the ACK carries no position.
    pub fn process_ack(&mut self, ack: &AckInfo, now: f64) -> bool {
        let ok = ack.energy.is_finite()
            && ack.energy >= 0.0
            && ack.prr_reverse.is_none_or(|p| (0.0..=1.0).contains(&p))
            && ack.dq.0.iter().all(|d| d.is_finite() && *d >= 0.0);
        if !ok || ack.sender == self.owner {
            self.malformed += 1;
            return false;
        }
        match self.records.get_mut(&ack.sender) {
            Some(rec) => {
                if let Some(p) = ack.prr_reverse {
                    rec.prr = p;
                }
                rec.dq = ack.dq;
                rec.energy = ack.energy;
                rec.last_heard = rec.last_heard.max(now);
                true
            }
            None => false,
        }
    }

    /// `N_1(x)`.
    pub fn one_hop_set(&self, now: f64) -> BTreeSet<NodeId> {
        self.records(now).map(|r| r.neighbor).collect()
    }

    /// `N_2(x)`: union of the neighbors' one-hop lists, without `x`.
    /// One-hop neighbors are not excluded.
    pub fn two_hop_set(&self, now: f64) -> BTreeSet<NodeId> {
        self.records(now)
            .flat_map(|r| r.two_hop.iter().map(|e| e.id))
            .filter(|z| *z != self.owner)
            .collect()
    }

    /// `F_1^{+p}(x)`: neighbors strictly closer to `dest` than `x`.
    pub fn favorable_one_hop(&self, x_pos: Position, dest: Position, now: f64) -> Vec<NodeId> {
        let dx = dist(x_pos, dest);
        self.records(now)
            .filter(|r| dx - dist(r.position, dest) > 0.0)
            .map(|r| r.neighbor)
            .collect()
    }

    /// `F_2^{+p}(x)` with each pair's offered velocity for `class`.
    pub fn favorable_pairs(
        &self,
        local: &LocalView<'_>,
        dest: Position,
        class: PacketClass,
        now: f64,
    ) -> Vec<ForwarderPair> {
        let dx = dist(local.position, dest);
        let dq_x = local.delays.dq(class);
        let mut out = Vec::new();
        for r in self.records(now) {
            let dy = dist(r.position, dest);
            if dx - dy <= 0.0 {
                continue;
            }
            let dt_xy = local.delays.dt(r.neighbor);
            let tx_cost = local.tx_cost_to(r.position);
            for e in &r.two_hop {
                if e.id == local.id {
                    continue;
                }
                let dz = dist(e.position, dest);
                if dy - dz <= 0.0 {
                    continue;
                }
                let progress = dx - dz;
                let denominator = dq_x + dt_xy + r.dq.get(class) + e.dt;
                out.push(ForwarderPair {
                    y: r.neighbor,
                    z: e.id,
                    progress,
                    progress_y: dx - dy,
                    denominator,
                    velocity: if denominator > 0.0 {
                        progress / denominator
                    } else {
                        f64::INFINITY
                    },
                    prr_xy: r.prr,
                    prr_yz: e.prr,
                    prr_path: r.prr * e.prr,
                    energy_y: r.energy,
                    tx_cost,
                    power_score: r.energy / tx_cost,
                });
            }
        }
        out
    }
}
