//! Simulation configuration.
//!
//! One TOML document with a section per subsystem. Every field has a default;
//! [`SimConfig::default`] is the 900-node evaluation setup and
//! [`SimConfig::desk`] the 100-node field used for quick runs.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forwarding::RoutingPolicy;
use crate::geometry::Position;
use crate::neighborhood::WireLayout;
use crate::queueing::PromotionRule;
use crate::types::PacketClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub rng_seed: u64,
    /// Simulated seconds.
    pub duration: f64,
    pub field: FieldConfig,
    pub radio: RadioConfig,
    pub link: LinkModel,
    pub mac: MacConfig,
    pub energy: EnergyConfig,
    pub traffic: TrafficConfig,
    pub estimators: EstimatorConfig,
    pub neighborhood: NeighborhoodConfig,
    pub queueing: QueueingConfig,
    pub routing: RoutingPolicy,
    pub lifetime: LifetimeDefinition,
    /// Sink positions; sink `i` gets node id `i`. Empty means the two field corners.
    pub sinks: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub width: f64,
    pub height: f64,
    /// Total nodes including sinks and the source.
    pub node_count: u32,
    /// Nominal node density in nodes/m²; checked against count/area.
    pub density: Option<f64>,
    /// Placement attempts before giving up on source-to-sink connectivity.
    pub max_placement_attempts: u32,
    /// Relay positions placed before the random ones, for scripted layouts.
    pub nodes: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    /// Transmission range in meters.
    pub range: f64,
    pub bandwidth_bps: f64,
    pub path_loss_exponent: f64,
    pub propagation_speed: f64,
}

/// Hidden per-link delivery probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkModel {
    /// `clamp(1 − (d/range)^kappa, p_min, 1)`.
    DistanceDegraded {
        kappa: f64,
        p_min: f64,
    },
    Perfect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    /// Uniform backoff in `[0, contention_window]` seconds per attempt.
    pub contention_window: f64,
    /// Retransmissions after the first attempt.
    pub max_retries: u32,
    pub ack_bytes: u32,
    /// Extra wait beyond the expected ACK arrival before retrying.
    pub ack_timeout_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Joules.
    pub initial: f64,
    /// Joules per full-range transmission.
    pub tx: f64,
    /// Joules per reception.
    pub rx: f64,
    /// Joules per sleep interval.
    pub sleep: f64,
    /// Joules per idle interval; also the cost of sending or receiving a control frame.
    pub idle: f64,
    /// Seconds between idle charges.
    pub audit_interval: f64,
    pub mains_powered_sinks: bool,
    pub mains_powered_source: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Defaults to the field center.
    pub source: Option<Position>,
    /// Constant bit rate in bytes/s.
    pub cbr_rate: f64,
    pub payload_bytes: u32,
    pub critical_rate: f64,
    pub delay_responsive_rate: f64,
    pub reliability_responsive_rate: f64,
    /// End-to-end deadline in seconds.
    pub deadline: f64,
    /// First packet time; leaves room for two beacon rounds.
    pub start: f64,
    /// Classes copied at the source toward every sink (TDTHR only).
    pub duplicate_classes: Vec<PacketClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub prr_window: u32,
    pub prr_beta: f64,
    pub prr_prior: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeighborhoodConfig {
    pub hello_period: f64,
    /// Record expiry in HELLO periods.
    pub expiry_periods: f64,
    pub wire: WireLayout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueingConfig {
    /// Packets per queue; the single FIFO of the baselines holds three times this.
    pub capacity: u32,
    pub promotion: PromotionRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LifetimeDefinition {
    #[default]
    FirstDeath,
    SourceDisconnected,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            width: 1800.0,
            height: 1800.0,
            node_count: 900,
            density: Some(0.00027),
            max_placement_attempts: 100,
            nodes: Vec::new(),
        }
    }
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            range: 100.0,
            bandwidth_bps: 250_000.0,
            path_loss_exponent: 2.0,
            propagation_speed: 3.0e8,
        }
    }
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel::DistanceDegraded { kappa: 4.0, p_min: 0.1 }
    }
}

impl LinkModel {
    pub fn delivery_probability(&self, distance: f64, range: f64) -> f64 {
        match *self {
            LinkModel::Perfect => 1.0,
            LinkModel::DistanceDegraded { kappa, p_min } => (1.0 - (distance / range).powf(kappa)).clamp(p_min, 1.0),
        }
    }
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            contention_window: 0.008,
            max_retries: 3,
            ack_bytes: 12,
            ack_timeout_slack: 0.001,
        }
    }
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            initial: 2.0,
            tx: 0.0522,
            rx: 0.0591,
            sleep: 0.00006,
            idle: 0.000003,
            audit_interval: 1.0,
            mains_powered_sinks: true,
            mains_powered_source: true,
        }
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            source: None,
            cbr_rate: 1000.0,
            payload_bytes: 150,
            critical_rate: 0.5,
            delay_responsive_rate: 0.0,
            reliability_responsive_rate: 0.0,
            deadline: 0.3,
            start: 10.0,
            duplicate_classes: vec![PacketClass::Critical, PacketClass::ReliabilityResponsive],
        }
    }
}

impl TrafficConfig {
    pub fn regular_rate(&self) -> f64 {
        (1.0 - self.critical_rate - self.delay_responsive_rate - self.reliability_responsive_rate).max(0.0)
    }

    /// Seconds between CBR packets.
    pub fn interval(&self) -> f64 {
        self.payload_bytes as f64 / self.cbr_rate
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            prr_window: 30,
            prr_beta: 0.6,
            prr_prior: 1.0,
            gamma: 0.5,
        }
    }
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        Self {
            hello_period: 5.0,
            expiry_periods: 2.5,
            wire: WireLayout::default(),
        }
    }
}

impl NeighborhoodConfig {
    pub fn expiry(&self) -> f64 {
        self.hello_period * self.expiry_periods
    }
}

impl Default for QueueingConfig {
    fn default() -> Self {
        Self {
            capacity: 64,
            promotion: PromotionRule::default(),
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rng_seed: 1,
            duration: 120.0,
            field: FieldConfig::default(),
            radio: RadioConfig::default(),
            link: LinkModel::default(),
            mac: MacConfig::default(),
            energy: EnergyConfig::default(),
            traffic: TrafficConfig::default(),
            estimators: EstimatorConfig::default(),
            neighborhood: NeighborhoodConfig::default(),
            queueing: QueueingConfig::default(),
            routing: RoutingPolicy::default(),
            lifetime: LifetimeDefinition::default(),
            sinks: Vec::new(),
        }
    }
}

impl SimConfig {
    /// 100 nodes on 600 m × 600 m at roughly the same density as the full setup.
    pub fn desk() -> Self {
        Self {
            field: FieldConfig {
                width: 600.0,
                height: 600.0,
                node_count: 100,
                density: Some(100.0 / 360_000.0),
                ..FieldConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fully resolved TOML with every default spelled out.
    pub fn to_toml_string(&self) -> String {
        let resolved = self.resolved();
        toml::to_string_pretty(&resolved).expect("config serializes")
    }

    /// Fills in derived defaults (sink and source positions).
    pub fn resolved(&self) -> SimConfig {
        let mut c = self.clone();
        if c.sinks.is_empty() {
            c.sinks = vec![Position::new(0.0, 0.0), Position::new(c.field.width, c.field.height)];
        }
        if c.traffic.source.is_none() {
            c.traffic.source = Some(Position::new(c.field.width / 2.0, c.field.height / 2.0));
        }
        c
    }

    pub fn sink_positions(&self) -> Vec<Position> {
        self.resolved().sinks
    }

    pub fn source_position(&self) -> Position {
        self.resolved().traffic.source.expect("resolved")
    }

    /// Short stable hash of the resolved config, seed excluded.
    pub fn hash(&self) -> String {
        let mut c = self.resolved();
        c.rng_seed = 0;
        let text = toml::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut s = String::with_capacity(16);
        for b in &digest[..8] {
            write!(s, "{b:02x}").unwrap();
        }
        s
    }

    /// Bound and cross-field checks. Each violation names its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let c = self.resolved();
        let mut positive = |name: &str, x: f64| {
            if !(x.is_finite() && x > 0.0) {
                v.push(format!("{name} = {x} must be finite and > 0"));
            }
        };
        positive("field.width", c.field.width);
        positive("field.height", c.field.height);
        positive("radio.range", c.radio.range);
        positive("radio.bandwidth_bps", c.radio.bandwidth_bps);
        positive("radio.propagation_speed", c.radio.propagation_speed);
        positive("traffic.cbr_rate", c.traffic.cbr_rate);
        positive("traffic.deadline", c.traffic.deadline);
        positive("energy.initial", c.energy.initial);
        positive("energy.tx", c.energy.tx);
        positive("energy.audit_interval", c.energy.audit_interval);
        positive("neighborhood.hello_period", c.neighborhood.hello_period);
        positive("neighborhood.expiry_periods", c.neighborhood.expiry_periods);

        let mut unit = |name: &str, x: f64| {
            if !(0.0..=1.0).contains(&x) {
                v.push(format!("{name} = {x} is outside [0, 1]"));
            }
        };
        unit("traffic.critical_rate", c.traffic.critical_rate);
        unit("traffic.delay_responsive_rate", c.traffic.delay_responsive_rate);
        unit(
            "traffic.reliability_responsive_rate",
            c.traffic.reliability_responsive_rate,
        );
        unit("estimators.prr_beta", c.estimators.prr_beta);
        unit("estimators.prr_prior", c.estimators.prr_prior);
        unit("estimators.gamma", c.estimators.gamma);
        unit("queueing.promotion.lag_fraction", c.queueing.promotion.lag_fraction);

        let mut non_negative = |name: &str, x: f64| {
            if !(x.is_finite() && x >= 0.0) {
                v.push(format!("{name} = {x} must be finite and >= 0"));
            }
        };
        non_negative("duration", c.duration);
        non_negative("energy.rx", c.energy.rx);
        non_negative("energy.sleep", c.energy.sleep);
        non_negative("energy.idle", c.energy.idle);
        non_negative("mac.contention_window", c.mac.contention_window);
        non_negative("mac.ack_timeout_slack", c.mac.ack_timeout_slack);
        non_negative("traffic.start", c.traffic.start);
        non_negative("queueing.promotion.floor", c.queueing.promotion.floor);

        let mix = c.traffic.critical_rate + c.traffic.delay_responsive_rate + c.traffic.reliability_responsive_rate;
        if mix > 1.0 + 1e-12 {
            v.push(format!(
                "traffic: critical_rate + delay_responsive_rate + reliability_responsive_rate = {mix} exceeds 1"
            ));
        }
        if c.traffic.payload_bytes == 0 {
            v.push("traffic.payload_bytes must be >= 1".into());
        }
        if c.estimators.prr_window == 0 {
            v.push("estimators.prr_window = 0 must be >= 1".into());
        }
        if c.queueing.capacity == 0 {
            v.push("queueing.capacity must be >= 1".into());
        }
        if c.radio.path_loss_exponent < 2.0 || !c.radio.path_loss_exponent.is_finite() {
            v.push(format!(
                "radio.path_loss_exponent = {} must be >= 2",
                c.radio.path_loss_exponent
            ));
        }
        if c.field.max_placement_attempts == 0 {
            v.push("field.max_placement_attempts must be >= 1".into());
        }
        if let LinkModel::DistanceDegraded { kappa, p_min } = c.link {
            if !(kappa > 0.0) {
                v.push(format!("link.kappa = {kappa} must be > 0"));
            }
            if !(p_min > 0.0 && p_min <= 1.0) {
                v.push(format!("link.p_min = {p_min} is outside (0, 1]"));
            }
        }

        let inside = |p: &Position| {
            p.is_finite() && (0.0..=c.field.width).contains(&p.x) && (0.0..=c.field.height).contains(&p.y)
        };
        if c.sinks.is_empty() {
            v.push("sinks: at least one sink is required".into());
        }
        for (i, s) in c.sinks.iter().enumerate() {
            if !inside(s) {
                v.push(format!("sinks[{i}] at ({}, {}) lies outside the field", s.x, s.y));
            }
        }
        let src = c.traffic.source.expect("resolved");
        if !inside(&src) {
            v.push(format!(
                "traffic.source at ({}, {}) lies outside the field",
                src.x, src.y
            ));
        }
        for (i, p) in c.field.nodes.iter().enumerate() {
            if !inside(p) {
                v.push(format!("field.nodes[{i}] at ({}, {}) lies outside the field", p.x, p.y));
            }
        }
        let specials = c.sinks.len() as u32 + 1;
        if c.field.node_count < specials + c.field.nodes.len() as u32 {
            v.push(format!(
                "field.node_count = {} must cover {} sinks, the source and {} placed nodes",
                c.field.node_count,
                c.sinks.len(),
                c.field.nodes.len()
            ));
        }
        if let Some(d) = c.field.density {
            let actual = c.field.node_count as f64 / (c.field.width * c.field.height);
            if !(d > 0.0) || (actual - d).abs() > 0.2 * d {
                v.push(format!(
                    "field.density = {d} is inconsistent with node_count / area = {actual:.6} (tolerance 20%)"
                ));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    /// Sets a numeric field addressed by a dotted path, e.g. `traffic.critical_rate`.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<SimConfig> {
        let mut root = toml::Value::try_from(self.resolved()).map_err(|e| Error::Config(e.to_string()))?;
        let (sections, leaf) = match path.rsplit_once('.') {
            Some((a, b)) => (a.split('.').collect::<Vec<_>>(), b),
            None => (Vec::new(), path),
        };
        let missing = || Error::Config(format!("parameter {path} does not exist in the configuration"));
        let mut cur = &mut root;
        for part in sections {
            cur = cur.as_table_mut().and_then(|t| t.get_mut(part)).ok_or_else(missing)?;
        }
        let slot = cur.as_table_mut().and_then(|t| t.get_mut(leaf)).ok_or_else(missing)?;
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            _ => return Err(Error::Config(format!("parameter {path} is not numeric"))),
        };
        root.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }
}
