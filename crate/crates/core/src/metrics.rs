//! Per-run counters and the four headline metrics: packet reception ratio,
//! end-to-end delay, energy consumed per packet and network lifetime.
//!
//! Counting is per *logical* packet: a packet duplicated toward several
//! sinks is delivered if any copy arrives, and its delay is that of the
//! first copy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::energy::Energy;
use crate::types::{PacketClass, PerClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    Void,
    QueueFull,
    RetriesExhausted,
    Deadline,
    DeadNode,
}

impl DropCause {
    pub const ALL: [DropCause; 5] = [
        DropCause::Void,
        DropCause::QueueFull,
        DropCause::RetriesExhausted,
        DropCause::Deadline,
        DropCause::DeadNode,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DropCause::Void => "void",
            DropCause::QueueFull => "queue_full",
            DropCause::RetriesExhausted => "retries_exhausted",
            DropCause::Deadline => "deadline",
            DropCause::DeadNode => "dead_node",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassStats {
    pub generated: u64,
    pub delivered: u64,
    pub deadline_misses: u64,
    pub drops: [u64; 5],
    /// Still in the network when the run ended.
    pub unresolved: u64,
    /// End-to-end delay of every delivered logical packet, in delivery order.
    pub delays: Vec<f64>,
}

impl ClassStats {
    pub fn dropped(&self) -> u64 {
        self.drops.iter().sum()
    }

    /// `generated = delivered + drops + unresolved`.
    pub fn is_closed(&self) -> bool {
        self.generated == self.delivered + self.dropped() + self.unresolved
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub mean: f64,
    pub p95: f64,
    pub max: f64,
}

impl DelayStats {
    pub fn of(samples: &[f64]) -> Option<DelayStats> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        // Nearest rank.
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(DelayStats {
            mean,
            p95: sorted[rank - 1],
            max: *sorted.last().unwrap(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLedger {
    pub protocol: String,
    pub seed: u64,
    pub config_hash: String,
    pub critical_rate: f64,
    pub duration: f64,
    /// Simulated time at which the run stopped.
    pub end_time: f64,
    pub classes: PerClass<ClassStats>,
    /// Physical copies created, including duplicates.
    pub copies_generated: u64,
    pub copies_delivered: u64,
    pub total_energy_spent: Energy,
    /// Share of `total_energy_spent` due to HELLO and ACK frames.
    pub control_energy: Energy,
    pub data_transmissions: u64,
    pub hello_messages: u64,
    pub control_bytes: u64,
    pub promotions: u64,
    /// Forwarding decisions that could not meet the required velocity.
    pub missed_velocity: u64,
    pub first_death_time: Option<f64>,
    /// Time the source lost every path to the sinks, when observed.
    pub disconnection_time: Option<f64>,
    pub lifetime: f64,
    pub deaths: u64,
    pub energy_conserved: bool,
}

impl MetricsLedger {
    pub fn class(&self, class: PacketClass) -> &ClassStats {
        self.classes.get(class)
    }

    pub fn generated(&self) -> u64 {
        self.classes.0.iter().map(|c| c.generated).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.classes.0.iter().map(|c| c.delivered).sum()
    }

    /// Logical packets delivered; the denominator of ECPP.
    pub fn packets_effectively_transmitted(&self) -> u64 {
        self.delivered()
    }

    /// Delivered over generated for one class; absent when none was generated.
    pub fn prr(&self, class: PacketClass) -> Option<f64> {
        let c = self.class(class);
        (c.generated > 0).then(|| c.delivered as f64 / c.generated as f64)
    }

    pub fn prr_all(&self) -> Option<f64> {
        let g = self.generated();
        (g > 0).then(|| self.delivered() as f64 / g as f64)
    }

    pub fn mean_delay(&self, class: PacketClass) -> Option<DelayStats> {
        DelayStats::of(&self.class(class).delays)
    }

    /// Joules per delivered logical packet.
    pub fn ecpp(&self) -> Option<f64> {
        let d = self.packets_effectively_transmitted();
        (d > 0).then(|| self.total_energy_spent.joules() / d as f64)
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn deadline_miss_ratio(&self) -> Option<f64> {
        let g = self.generated();
        let misses: u64 = self.classes.0.iter().map(|c| c.deadline_misses).sum();
        (g > 0).then(|| misses as f64 / g as f64)
    }

    pub fn drops(&self, cause: DropCause) -> u64 {
        self.classes.0.iter().map(|c| c.drops[cause.index()]).sum()
    }

    pub fn is_closed(&self) -> bool {
        self.classes.0.iter().all(ClassStats::is_closed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        writeln!(
            s,
            "protocol {} seed {} (ran {:.1} s)",
            self.protocol, self.seed, self.end_time
        )
        .unwrap();
        for class in PacketClass::ALL {
            let c = self.class(class);
            if c.generated == 0 {
                continue;
            }
            writeln!(
                s,
                "  {:<12} generated {:>5}  prr {}  mean delay {}",
                class.short_name(),
                c.generated,
                opt(self.prr(class)),
                opt(self.mean_delay(class).map(|d| d.mean))
            )
            .unwrap();
        }
        writeln!(
            s,
            "  ecpp {} J/packet  lifetime {:.2} s",
            opt(self.ecpp()),
            self.lifetime
        )
        .unwrap();
        write!(s, "  drops:").unwrap();
        for cause in DropCause::ALL {
            write!(s, " {}={}", cause.name(), self.drops(cause)).unwrap();
        }
        s
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> = ["config_hash", "seed", "protocol", "critical_rate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for c in PacketClass::ALL {
            cols.push(format!("prr_{}", c.short_name()));
        }
        for c in PacketClass::ALL {
            cols.push(format!("delay_mean_{}", c.short_name()));
            cols.push(format!("delay_p95_{}", c.short_name()));
        }
        cols.extend(["deadline_miss_ratio", "ecpp", "lifetime"].map(String::from));
        for cause in DropCause::ALL {
            cols.push(format!("drops_{}", cause.name()));
        }
        cols.extend(["generated", "delivered"].map(String::from));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(sig6).unwrap_or_default();
        let mut cols = vec![
            self.config_hash.clone(),
            self.seed.to_string(),
            self.protocol.clone(),
            sig6(self.critical_rate),
        ];
        for c in PacketClass::ALL {
            cols.push(opt(self.prr(c)));
        }
        for c in PacketClass::ALL {
            let d = self.mean_delay(c);
            cols.push(opt(d.map(|d| d.mean)));
            cols.push(opt(d.map(|d| d.p95)));
        }
        cols.push(opt(self.deadline_miss_ratio()));
        cols.push(opt(self.ecpp()));
        cols.push(sig6(self.lifetime));
        for cause in DropCause::ALL {
            cols.push(self.drops(cause).to_string());
        }
        cols.push(self.generated().to_string());
        cols.push(self.delivered().to_string());
        cols.join(",")
    }
}

/// Formats with six significant digits, dropping trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        // Rounding can carry into a new digit (e.g. 999999.5); fall back to scientific.
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 6 {
            format!("{x:.5e}")
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger_with(class: PacketClass, generated: u64, delivered: u64) -> MetricsLedger {
        let mut l = MetricsLedger::default();
        let c = l.classes.get_mut(class);
        c.generated = generated;
        c.delivered = delivered;
        l
    }

    #[test]
    fn prr_ratio() {
        let l = ledger_with(PacketClass::Regular, 100, 87);
        assert!((l.prr(PacketClass::Regular).unwrap() - 0.87).abs() < 1e-12);
        assert_eq!(l.prr(PacketClass::Critical), None);
        assert_eq!(
            ledger_with(PacketClass::Critical, 10, 10).prr(PacketClass::Critical),
            Some(1.0)
        );
    }

    #[test]
    fn delay_stats() {
        let d = DelayStats::of(&[0.1, 0.2, 0.3]).unwrap();
        assert!((d.mean - 0.2).abs() < 1e-12);
        assert_eq!(d.max, 0.3);
        assert_eq!(d.p95, 0.3);
        assert_eq!(DelayStats::of(&[]), None);
        let many: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(DelayStats::of(&many).unwrap().p95, 95.0);
    }

    #[test]
    fn ecpp_definition() {
        let mut l = ledger_with(PacketClass::Regular, 120, 100);
        l.total_energy_spent = Energy::from_joules(10.0);
        assert!((l.ecpp().unwrap() - 0.1).abs() < 1e-12);
        let mut l = ledger_with(PacketClass::Regular, 5, 0);
        l.total_energy_spent = Energy::from_joules(1.0);
        assert_eq!(l.ecpp(), None);
    }

    #[test]
    fn closure() {
        let mut l = ledger_with(PacketClass::Critical, 10, 6);
        l.classes.get_mut(PacketClass::Critical).drops[DropCause::Void.index()] = 3;
        assert!(!l.is_closed());
        l.classes.get_mut(PacketClass::Critical).unresolved = 1;
        assert!(l.is_closed());
    }

    #[test]
    fn sig6_format() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(120.0), "120");
        assert_eq!(sig6(0.0000123456789), "1.23457e-5");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(999999.7), "1.00000e6");
    }

    #[test]
    fn csv_shape() {
        let l = ledger_with(PacketClass::Regular, 10, 9);
        let h = MetricsLedger::csv_header();
        let r = l.csv_row();
        assert_eq!(h.split(',').count(), r.split(',').count());
        assert!(h.starts_with("config_hash,seed,protocol,critical_rate,prr_regular"));
    }
}
