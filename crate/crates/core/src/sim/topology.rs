use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{dist, Position};
use crate::types::NodeId;

use super::config::SimConfig;

/// Node placement plus the roles of the distinguished nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<Position>,
    pub sinks: Vec<NodeId>,
    pub source: NodeId,
    pub range: f64,
    /// Placement attempt that produced this topology (0-based).
    pub attempt: u32,
}

impl Topology {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Position {
        self.positions[id.index()]
    }

    /// Ground-truth neighbors: every other node within range.
    pub fn neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let p = self.position(id);
        (0..self.positions.len())
            .filter(|&j| j != id.index() && dist(p, self.positions[j]) <= self.range)
            .map(NodeId::from)
            .collect()
    }

    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.positions.len())
            .map(|i| self.neighbors(NodeId::from(i)))
            .collect()
    }

    /// Nodes reachable from `from` through nodes accepted by `usable`.
    pub fn reachable(&self, adjacency: &[Vec<NodeId>], from: NodeId, usable: impl Fn(NodeId) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.positions.len()];
        if !usable(from) {
            return seen;
        }
        seen[from.index()] = true;
        let mut q = VecDeque::from([from]);
        while let Some(u) = q.pop_front() {
            for &v in &adjacency[u.index()] {
                if !seen[v.index()] && usable(v) {
                    seen[v.index()] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    pub fn source_reaches_all_sinks(&self) -> bool {
        let adj = self.adjacency();
        let seen = self.reachable(&adj, self.source, |_| true);
        self.sinks.iter().all(|s| seen[s.index()])
    }
}

/// Places sinks and the source at their configured spots and the remaining
/// nodes uniformly at random (a Poisson field conditioned on its count).
/// Placements where the source cannot reach every sink are redrawn.
pub fn generate_topology(cfg: &SimConfig, seed: u64) -> Result<Topology> {
    let cfg = cfg.resolved();
    let sinks = cfg.sinks.clone();
    let source = cfg.traffic.source.expect("resolved");
    let n = cfg.field.node_count as usize;
    let fixed = sinks.len() + 1;
    if n < fixed + cfg.field.nodes.len() {
        return Err(Error::Config(format!(
            "field.node_count = {n} is smaller than sinks + source"
        )));
    }
    for attempt in 0..cfg.field.max_placement_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + attempt as u64);
        let mut positions = sinks.clone();
        positions.push(source);
        positions.extend(cfg.field.nodes.iter().copied());
        for _ in positions.len()..n {
            positions.push(Position::new(
                rng.gen::<f64>() * cfg.field.width,
                rng.gen::<f64>() * cfg.field.height,
            ));
        }
        let topo = Topology {
            positions,
            sinks: (0..sinks.len()).map(NodeId::from).collect(),
            source: NodeId::from(sinks.len()),
            range: cfg.radio.range,
            attempt,
        };
        if topo.source_reaches_all_sinks() {
            return Ok(topo);
        }
    }
    Err(Error::Config(format!(
        "no placement connected the source to every sink within {} attempts",
        cfg.field.max_placement_attempts
    )))
}
