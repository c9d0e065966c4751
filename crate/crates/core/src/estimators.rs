//! Link-reliability and delay estimators.
//!
//! `PrrEstimator` is a window-mean EWMA kept by the receiver of a link.
//! `DelayEstimator` holds the per-class queuing delay of the owning node and
//! the transmission delay toward each neighbor, both plain EWMAs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::{NodeId, PacketClass, PerClass};

/// Window-mean EWMA of a link's packet reception ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PrrEstimator {
    prr: f64,
    window: u32,
    beta: f64,
    received: u32,
    missed: u32,
}

impl PrrEstimator {
    pub fn new(initial: f64, window: u32, beta: f64) -> Self {
        assert!((0.0..=1.0).contains(&initial), "prr prior must lie in [0,1]");
        assert!(window >= 1, "window must be at least one packet");
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0,1]");
        Self {
            prr: initial,
            window,
            beta,
            received: 0,
            missed: 0,
        }
    }

    pub fn prr(&self) -> f64 {
        self.prr
    }

    pub fn received_in_window(&self) -> u32 {
        self.received
    }

    pub fn missed_in_window(&self) -> u32 {
        self.missed
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Records one received packet; folds the window in once it is full.
    /// Returns the new estimate if an update fired.
    pub fn record_received(&mut self) -> Option<f64> {
        self.received += 1;
        self.maybe_roll()
    }

    /// Records one missed packet; folds the window in once it is full.
    pub fn record_missed(&mut self) -> Option<f64> {
        self.missed += 1;
        self.maybe_roll()
    }

    fn maybe_roll(&mut self) -> Option<f64> {
        if self.received + self.missed >= self.window {
            // r + m > 0 here because window >= 1.
            self.update().ok()
        } else {
            None
        }
    }

    /// `prr ← β·prr + (1−β)·r/(r+m)`, then resets the window counters.
    pub fn update(&mut self) -> Result<f64> {
        let total = self.received + self.missed;
        if total == 0 {
            return Err(Error::EmptyWindow);
        }
        let measured = self.received as f64 / total as f64;
        self.prr = (self.beta * self.prr + (1.0 - self.beta) * measured).clamp(0.0, 1.0);
        self.received = 0;
        self.missed = 0;
        Ok(self.prr)
    }
}

/// Infers misses at a receiver from gaps in a sender's sequence numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeqGapTracker {
    last: Option<u64>,
}

impl SeqGapTracker {
    /// Returns the number of packets missed since the last one seen, or
    /// `None` for a stale or repeated sequence number.
    pub fn observe(&mut self, seq: u64) -> Option<u64> {
        match self.last {
            None => {
                self.last = Some(seq);
                Some(0)
            }
            Some(last) if seq > last => {
                self.last = Some(seq);
                Some(seq - last - 1)
            }
            Some(_) => None,
        }
    }
}

/// Queuing and transmission delay estimates held by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimator {
    dq: PerClass<f64>,
    dt: BTreeMap<NodeId, f64>,
    gamma: f64,
    dt_prior: f64,
}

impl DelayEstimator {
    pub fn new(gamma: f64, dq_prior: f64, dt_prior: f64) -> Self {
        assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0,1]");
        assert!(dq_prior >= 0.0 && dt_prior >= 0.0);
        Self {
            dq: PerClass::splat(dq_prior),
            dt: BTreeMap::new(),
            gamma,
            dt_prior,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dq(&self, class: PacketClass) -> f64 {
        *self.dq.get(class)
    }

    pub fn dq_all(&self) -> PerClass<f64> {
        self.dq
    }

    pub fn dt(&self, neighbor: NodeId) -> f64 {
        self.dt.get(&neighbor).copied().unwrap_or(self.dt_prior)
    }

    pub fn dt_prior(&self) -> f64 {
        self.dt_prior
    }

    pub fn known_links(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.dt.iter().map(|(k, v)| (*k, *v))
    }

    /// Folds a realized queue wait for `class` into its estimate.
    pub fn dq_update(&mut self, class: PacketClass, sample: f64) -> Result<f64> {
        if !(sample >= 0.0) {
            return Err(Error::NegativeSample(sample));
        }
        let slot = self.dq.get_mut(class);
        *slot = self.gamma * *slot + (1.0 - self.gamma) * sample;
        Ok(*slot)
    }

    /// Folds `t_ack − ack_bits/bw − t_s` into the transmission delay toward
    /// `neighbor`. The sample absorbs contention, retries and propagation.
    pub fn dt_update(
        &mut self,
        neighbor: NodeId,
        t_s: f64,
        t_ack: f64,
        ack_bytes: u32,
        bandwidth_bps: f64,
    ) -> Result<f64> {
        let sample = t_ack - ack_bytes as f64 * 8.0 / bandwidth_bps - t_s;
        if !(t_ack > t_s) || !(sample > 0.0) {
            return Err(Error::NonPositiveSample(sample));
        }
        let old = self.dt(neighbor);
        let new = self.gamma * old + (1.0 - self.gamma) * sample;
        self.dt.insert(neighbor, new);
        Ok(new)
    }

    pub fn forget(&mut self, neighbor: NodeId) {
        self.dt.remove(&neighbor);
    }
}

/// Per-hop nodal delay. Contention is already folded into `dt`.
pub fn nodal_delay(dq: f64, dt: f64) -> f64 {
    dq + dt
}
