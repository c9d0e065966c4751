//! Next-hop selection.
//!
//! TDTHR evaluates every favorable two-hop pair `(y, z)`, keeps the pairs whose
//! offered velocity meets the packet's required velocity, and then applies a
//! class policy: delay-responsive traffic picks the most power-efficient first
//! hop, critical traffic the most reliable one. Regular and
//! reliability-responsive traffic use greedy progress and best path PRR.
//! Two comparison routers are provided: a one-hop velocity router and plain
//! greedy geographic forwarding.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, Position};
use crate::neighborhood::{ForwarderPair, LocalView, NeighborTable};
use crate::types::{NodeId, PacketClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Tdthr,
    OneHopVelocity,
    GreedyGeo,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Tdthr, Protocol::OneHopVelocity, Protocol::GreedyGeo];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Tdthr => "tdthr",
            Protocol::OneHopVelocity => "one_hop_velocity",
            Protocol::GreedyGeo => "greedy_geo",
        }
    }

    /// Whether packets go through the three-queue controller (otherwise one FIFO).
    pub fn uses_priority_queues(self) -> bool {
        matches!(self, Protocol::Tdthr)
    }

    /// Whether deadline-bound packets whose lag time ran out are dropped.
    pub fn enforces_deadlines(self) -> bool {
        !matches!(self, Protocol::GreedyGeo)
    }
}

/// Which reception ratio ranks critical candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CriticalPrrScope {
    /// `prr_xy` only.
    OneHop,
    /// `prr_xy · prr_yz`.
    #[default]
    TwoHop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingPolicy {
    pub protocol: Protocol,
    pub critical_prr_scope: CriticalPrrScope,
}

impl Default for RoutingPolicy {
    fn default() -> Self {
        Self {
            protocol: Protocol::Tdthr,
            critical_prr_scope: CriticalPrrScope::TwoHop,
        }
    }
}

/// Offered two-hop velocity: progress over the summed per-hop delays.
pub fn offered_velocity(progress: f64, dq_x: f64, dt_xy: f64, dq_y: f64, dt_yz: f64) -> Result<f64> {
    let den = dq_x + dt_xy + dq_y + dt_yz;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(progress / den)
}

/// One-hop velocity `progress_y / dt_xy`.
pub fn one_hop_velocity(progress_y: f64, dt_xy: f64) -> Result<f64> {
    offered_velocity(progress_y, 0.0, dt_xy, 0.0, 0.0)
}

/// Renews the lag time before transmission:
/// `lt_p − (t_tx − t_rx + size·8/bw)`.
pub fn update_lag_time(lt_p: f64, t_rx: f64, t_tx: f64, packet_bytes: u32, bandwidth_bps: f64) -> Result<f64> {
    debug_assert!(t_tx >= t_rx, "transmission before reception");
    let lt = lt_p - ((t_tx - t_rx) + packet_bytes as f64 * 8.0 / bandwidth_bps);
    if lt <= 0.0 {
        return Err(Error::DeadlineExpired(lt));
    }
    Ok(lt)
}

/// `dist(x,D) / lt`.
pub fn required_velocity(dist_to_sink: f64, lag_time: f64) -> f64 {
    dist_to_sink / lag_time
}

/// Pairs under consideration for one packet, with the subset that is fast enough.
#[derive(Debug, Clone)]
pub struct VelocityContext {
    pub required_velocity: f64,
    pub lag_time: f64,
    pub dist_to_sink: f64,
    pub pairs: Vec<ForwarderPair>,
    /// Indices into `pairs` with `velocity ≥ required_velocity`.
    pub s_req: Vec<usize>,
}

impl VelocityContext {
    pub fn new(dist_to_sink: f64, lag_time: f64, pairs: Vec<ForwarderPair>) -> Self {
        let required_velocity = required_velocity(dist_to_sink, lag_time);
        let s_req = pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.velocity >= required_velocity)
            .map(|(i, _)| i)
            .collect();
        Self {
            required_velocity,
            lag_time,
            dist_to_sink,
            pairs,
            s_req,
        }
    }

    pub fn qualifying(&self) -> impl Iterator<Item = &ForwarderPair> + '_ {
        self.s_req.iter().map(move |&i| &self.pairs[i])
    }

    /// Pair with the highest offered velocity regardless of the requirement.
    pub fn fastest(&self) -> Option<&ForwarderPair> {
        best_by(
            self.pairs.iter(),
            |a, b| cmp_f64(a.velocity, b.velocity),
            |p| (p.y, p.z),
        )
    }
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Maximum under `better`, ties going to the lowest key.
fn best_by<'a, T: 'a, K: Ord>(
    items: impl Iterator<Item = &'a T>,
    better: impl Fn(&T, &T) -> Ordering,
    key: impl Fn(&T) -> K,
) -> Option<&'a T> {
    items.fold(None, |best: Option<&T>, item| match best {
        None => Some(item),
        Some(b) => match better(item, b) {
            Ordering::Greater => Some(item),
            Ordering::Equal if key(item) < key(b) => Some(item),
            _ => Some(b),
        },
    })
}

fn prr_of(pair: &ForwarderPair, scope: CriticalPrrScope) -> f64 {
    match scope {
        CriticalPrrScope::OneHop => pair.prr_xy,
        CriticalPrrScope::TwoHop => pair.prr_path,
    }
}

fn most_power_efficient<'a>(pairs: impl Iterator<Item = &'a ForwarderPair>) -> Option<&'a ForwarderPair> {
    best_by(pairs, |a, b| cmp_f64(a.power_score, b.power_score), |p| (p.y, p.z))
}

/// Class policy over the qualifying pairs.
pub fn select_next_hop(class: PacketClass, ctx: &VelocityContext, scope: CriticalPrrScope) -> Result<NodeId> {
    if ctx.s_req.is_empty() {
        return Err(Error::NoQualifyingPair);
    }
    if ctx.s_req.len() == 1 {
        return Ok(ctx.pairs[ctx.s_req[0]].y);
    }
    match class {
        PacketClass::DelayResponsive => Ok(most_power_efficient(ctx.qualifying()).expect("non-empty").y),
        PacketClass::Critical => {
            let best = ctx
                .qualifying()
                .map(|p| prr_of(p, scope))
                .fold(f64::NEG_INFINITY, f64::max);
            let s_c: Vec<&ForwarderPair> = ctx.qualifying().filter(|p| prr_of(p, scope) == best).collect();
            if s_c.len() == 1 {
                Ok(s_c[0].y)
            } else {
                Ok(most_power_efficient(s_c.into_iter()).expect("non-empty").y)
            }
        }
        other => Err(Error::Invariant(format!("{other} traffic is not velocity-routed"))),
    }
}

/// A first-hop candidate with positive progress.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHopCandidate {
    pub y: NodeId,
    pub progress: f64,
    pub prr_xy: f64,
    pub dt_xy: f64,
    pub energy_y: f64,
    pub tx_cost: f64,
    pub power_score: f64,
}

/// `F_1^{+p}(x)` with the per-neighbor attributes routers need.
pub fn one_hop_candidates(
    local: &LocalView<'_>,
    table: &NeighborTable,
    dest: Position,
    now: f64,
) -> Vec<OneHopCandidate> {
    let dx = dist(local.position, dest);
    table
        .records(now)
        .filter_map(|r| {
            let progress = dx - dist(r.position, dest);
            (progress > 0.0).then(|| {
                let tx_cost = local.tx_cost_to(r.position);
                OneHopCandidate {
                    y: r.neighbor,
                    progress,
                    prr_xy: r.prr,
                    dt_xy: local.delays.dt(r.neighbor),
                    energy_y: r.energy,
                    tx_cost,
                    power_score: r.energy / tx_cost,
                }
            })
        })
        .collect()
}

/// Greedy geographic choice: maximum progress.
pub fn route_regular(candidates: &[OneHopCandidate]) -> Result<NodeId> {
    best_by(candidates.iter(), |a, b| cmp_f64(a.progress, b.progress), |c| c.y)
        .map(|c| c.y)
        .ok_or(Error::Void)
}

/// Most reliable two-hop path; without pairs, the most reliable first hop.
/// Ties go to the better power score, then the lower id.
pub fn route_reliability(pairs: &[ForwarderPair], candidates: &[OneHopCandidate]) -> Result<NodeId> {
    if !pairs.is_empty() {
        let best = best_by(
            pairs.iter(),
            |a, b| cmp_f64(a.prr_path, b.prr_path).then(cmp_f64(a.power_score, b.power_score)),
            |p| (p.y, p.z),
        );
        return Ok(best.expect("non-empty").y);
    }
    best_by(
        candidates.iter(),
        |a, b| cmp_f64(a.prr_xy, b.prr_xy).then(cmp_f64(a.power_score, b.power_score)),
        |c| c.y,
    )
    .map(|c| c.y)
    .ok_or(Error::Void)
}

/// Algorithm 1 over one-hop velocities `V_xy`: the candidates meeting the
/// requirement go through the same class policy as the pairs (power score for
/// delay-responsive, first-hop PRR then power score for critical). When none
/// qualifies the fastest candidate is returned, flagged as a miss.
pub fn route_one_hop_velocity(
    class: PacketClass,
    candidates: &[OneHopCandidate],
    required_velocity: f64,
) -> Result<(NodeId, bool)> {
    let velocity = |c: &OneHopCandidate| one_hop_velocity(c.progress, c.dt_xy).unwrap_or(f64::INFINITY);
    let qualifying: Vec<&OneHopCandidate> = candidates.iter().filter(|c| velocity(c) >= required_velocity).collect();
    if qualifying.is_empty() {
        let best = best_by(candidates.iter(), |a, b| cmp_f64(velocity(a), velocity(b)), |c| c.y).ok_or(Error::Void)?;
        return Ok((best.y, true));
    }
    let power = |a: &&OneHopCandidate, b: &&OneHopCandidate| cmp_f64(a.power_score, b.power_score);
    let best = match class {
        PacketClass::Critical => best_by(
            qualifying.iter(),
            |a, b| cmp_f64(a.prr_xy, b.prr_xy).then(power(a, b)),
            |c| c.y,
        ),
        _ => best_by(qualifying.iter(), power, |c| c.y),
    };
    Ok((best.expect("non-empty").y, false))
}

/// Outcome of a routing decision at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub next_hop: NodeId,
    /// Advisory second hop; the first hop re-decides on receipt.
    pub via: Option<NodeId>,
    pub missed_velocity: bool,
}

impl Decision {
    fn direct(y: NodeId) -> Self {
        Self {
            next_hop: y,
            via: None,
            missed_velocity: false,
        }
    }
}

/// Everything a router needs to know about the packet being forwarded.
#[derive(Debug, Clone, Copy)]
pub struct RouteRequest {
    pub class: PacketClass,
    pub lag_time: f64,
    pub destination: NodeId,
    pub destination_position: Position,
    pub now: f64,
}

/// Picks the next hop for a packet at the node described by `local`.
///
/// A destination sink that is itself a neighbor is always used directly.
pub fn decide(
    policy: &RoutingPolicy,
    local: &LocalView<'_>,
    table: &NeighborTable,
    req: &RouteRequest,
) -> Result<Decision> {
    if table.record(req.destination, req.now).is_some() {
        return Ok(Decision::direct(req.destination));
    }
    let dest = req.destination_position;
    let candidates = one_hop_candidates(local, table, dest, req.now);
    if candidates.is_empty() {
        return Err(Error::Void);
    }
    let dist_to_sink = dist(local.position, dest);
    match policy.protocol {
        Protocol::GreedyGeo => route_regular(&candidates).map(Decision::direct),
        Protocol::OneHopVelocity => match req.class {
            PacketClass::Regular => route_regular(&candidates).map(Decision::direct),
            PacketClass::ReliabilityResponsive => route_reliability(&[], &candidates).map(Decision::direct),
            PacketClass::DelayResponsive | PacketClass::Critical => {
                let (y, missed) =
                    route_one_hop_velocity(req.class, &candidates, required_velocity(dist_to_sink, req.lag_time))?;
                Ok(Decision {
                    next_hop: y,
                    via: None,
                    missed_velocity: missed,
                })
            }
        },
        Protocol::Tdthr => match req.class {
            PacketClass::Regular => route_regular(&candidates).map(Decision::direct),
            PacketClass::ReliabilityResponsive => {
                let pairs = table.favorable_pairs(local, dest, req.class, req.now);
                route_reliability(&pairs, &candidates).map(Decision::direct)
            }
            PacketClass::DelayResponsive | PacketClass::Critical => {
                let pairs = table.favorable_pairs(local, dest, req.class, req.now);
                if pairs.is_empty() {
                    // No two-hop knowledge yet: fall back to one-hop velocity.
                    let (y, missed) =
                        route_one_hop_velocity(req.class, &candidates, required_velocity(dist_to_sink, req.lag_time))?;
                    return Ok(Decision {
                        next_hop: y,
                        via: None,
                        missed_velocity: missed,
                    });
                }
                let ctx = VelocityContext::new(dist_to_sink, req.lag_time, pairs);
                match select_next_hop(req.class, &ctx, policy.critical_prr_scope) {
                    Ok(y) => {
                        let via = ctx.qualifying().find(|p| p.y == y).map(|p| p.z);
                        Ok(Decision {
                            next_hop: y,
                            via,
                            missed_velocity: false,
                        })
                    }
                    Err(Error::NoQualifyingPair) => {
                        let p = ctx.fastest().expect("pairs non-empty");
                        Ok(Decision {
                            next_hop: p.y,
                            via: Some(p.z),
                            missed_velocity: true,
                        })
                    }
                    Err(e) => Err(e),
                }
            }
        },
    }
}
