//! Per-node queuing controller.
//!
//! Three strict-priority FIFO queues. Critical packets go to the critical
//! queue; delay-responsive packets to the delay queue; regular and
//! reliability-responsive packets to the reliability queue. Every packet
//! outside the critical queue carries a promotion timer; when it fires the
//! packet moves to the tail of the critical queue. Transmission stops the
//! timer. The baselines use the same type in single-FIFO mode.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::types::{Packet, PacketClass, PacketId};

/// Promotion delay `max(lag_time · fraction, floor)`, fixed at enqueue time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromotionRule {
    pub lag_fraction: f64,
    pub floor: f64,
}

impl Default for PromotionRule {
    fn default() -> Self {
        Self {
            lag_fraction: 0.5,
            floor: 0.010,
        }
    }
}

impl PromotionRule {
    pub fn delay(&self, lag_time: f64) -> f64 {
        (lag_time * self.lag_fraction).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueKind {
    Critical,
    Delay,
    Reliability,
}

impl QueueKind {
    pub fn for_class(class: PacketClass) -> QueueKind {
        match class {
            PacketClass::Critical => QueueKind::Critical,
            PacketClass::DelayResponsive => QueueKind::Delay,
            PacketClass::ReliabilityResponsive | PacketClass::Regular => QueueKind::Reliability,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueEntry {
    pub packet: Packet,
    pub enqueue_time: f64,
    /// Absolute expiry of the promotion timer, if armed.
    pub timer: Option<f64>,
    pub promoted: bool,
}

/// A packet handed to the MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct Dequeued {
    pub packet: Packet,
    pub enqueue_time: f64,
    /// Realized queue wait, the sample for the packet's original class.
    pub wait: f64,
    pub promoted: bool,
}

/// Rejected by a full queue (tail drop).
#[derive(Debug, Clone, PartialEq)]
pub struct QueueFull(pub Packet);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueCounters {
    pub accepted: u64,
    pub rejected: u64,
    pub dequeued: u64,
    pub promoted: u64,
    pub drained: u64,
}

#[derive(Debug, Clone)]
pub struct QueueBank {
    critical: VecDeque<QueueEntry>,
    delay: VecDeque<QueueEntry>,
    reliability: VecDeque<QueueEntry>,
    capacity: usize,
    rule: PromotionRule,
    priority: bool,
    counters: QueueCounters,
}

impl QueueBank {
    /// Three-queue controller with `capacity` packets per queue.
    pub fn priority(capacity: usize, rule: PromotionRule) -> Self {
        Self {
            critical: VecDeque::new(),
            delay: VecDeque::new(),
            reliability: VecDeque::new(),
            capacity,
            rule,
            priority: true,
            counters: QueueCounters::default(),
        }
    }

    /// One FIFO holding `capacity` packets, no timers.
    pub fn fifo(capacity: usize) -> Self {
        Self {
            priority: false,
            ..Self::priority(capacity, PromotionRule::default())
        }
    }

    pub fn counters(&self) -> QueueCounters {
        self.counters
    }

    pub fn len(&self) -> usize {
        self.critical.len() + self.delay.len() + self.reliability.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queue(&self, kind: QueueKind) -> &VecDeque<QueueEntry> {
        match kind {
            QueueKind::Critical => &self.critical,
            QueueKind::Delay => &self.delay,
            QueueKind::Reliability => &self.reliability,
        }
    }

    fn queue_mut(&mut self, kind: QueueKind) -> &mut VecDeque<QueueEntry> {
        match kind {
            QueueKind::Critical => &mut self.critical,
            QueueKind::Delay => &mut self.delay,
            QueueKind::Reliability => &mut self.reliability,
        }
    }

    /// Places the packet by class. Returns the promotion timer expiry to
    /// schedule, if one was armed.
    pub fn enqueue(&mut self, packet: Packet, now: f64) -> Result<Option<f64>, QueueFull> {
        let kind = if self.priority {
            QueueKind::for_class(packet.class)
        } else {
            QueueKind::Reliability
        };
        if self.queue(kind).len() >= self.capacity {
            self.counters.rejected += 1;
            return Err(QueueFull(packet));
        }
        let timer = (self.priority && kind != QueueKind::Critical).then(|| now + self.rule.delay(packet.lag_time));
        self.queue_mut(kind).push_back(QueueEntry {
            packet,
            enqueue_time: now,
            timer,
            promoted: false,
        });
        self.counters.accepted += 1;
        Ok(timer)
    }

    /// Head of the highest-priority non-empty queue; its timer is stopped.
    pub fn dequeue_next(&mut self, now: f64) -> Option<Dequeued> {
        let entry = self
            .critical
            .pop_front()
            .or_else(|| self.delay.pop_front())
            .or_else(|| self.reliability.pop_front())?;
        self.counters.dequeued += 1;
        Some(Dequeued {
            wait: now - entry.enqueue_time,
            enqueue_time: entry.enqueue_time,
            promoted: entry.promoted,
            packet: entry.packet,
        })
    }

    /// Moves a still-queued packet whose timer expired at `deadline` to the
    /// critical tail. A timer that lost the race with transmission is a no-op.
    pub fn on_timer_expire(&mut self, id: PacketId, deadline: f64) -> bool {
        for kind in [QueueKind::Delay, QueueKind::Reliability] {
            let q = self.queue_mut(kind);
            if let Some(pos) = q.iter().position(|e| e.packet.id == id && e.timer == Some(deadline)) {
                let mut entry = q.remove(pos).expect("position is valid");
                entry.timer = None;
                entry.promoted = true;
                // Promotion may overfill the critical queue; capacity applies to arrivals only.
                self.critical.push_back(entry);
                self.counters.promoted += 1;
                return true;
            }
        }
        false
    }

    /// Empties every queue, e.g. when the node dies.
    pub fn drain(&mut self) -> Vec<Packet> {
        let mut out = Vec::with_capacity(self.len());
        for q in [&mut self.critical, &mut self.delay, &mut self.reliability] {
            out.extend(q.drain(..).map(|e| e.packet));
        }
        self.counters.drained += out.len() as u64;
        out
    }

    /// `accepted = dequeued + drained + resident`.
    pub fn is_balanced(&self) -> bool {
        let c = self.counters;
        c.accepted == c.dequeued + c.drained + self.len() as u64
    }
}
