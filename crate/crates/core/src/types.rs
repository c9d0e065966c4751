use std::fmt;

use serde::{Deserialize, Serialize};

/// Dense node identifier in `[0, N)`. Sinks share the same id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketClass {
    Regular,
    ReliabilityResponsive,
    DelayResponsive,
    Critical,
}

impl PacketClass {
    pub const ALL: [PacketClass; 4] = [
        PacketClass::Regular,
        PacketClass::ReliabilityResponsive,
        PacketClass::DelayResponsive,
        PacketClass::Critical,
    ];

    /// Stable index for per-class arrays.
    pub fn index(self) -> usize {
        match self {
            PacketClass::Regular => 0,
            PacketClass::ReliabilityResponsive => 1,
            PacketClass::DelayResponsive => 2,
            PacketClass::Critical => 3,
        }
    }

    /// Service priority; higher is served first. Regular and
    /// reliability-responsive traffic share the lowest level.
    pub fn priority(self) -> u8 {
        match self {
            PacketClass::Critical => 2,
            PacketClass::DelayResponsive => 1,
            PacketClass::ReliabilityResponsive | PacketClass::Regular => 0,
        }
    }

    /// Classes that carry a deadline the router must honor.
    pub fn is_deadline_bound(self) -> bool {
        matches!(self, PacketClass::DelayResponsive | PacketClass::Critical)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            PacketClass::Regular => "regular",
            PacketClass::ReliabilityResponsive => "reliability",
            PacketClass::DelayResponsive => "delay",
            PacketClass::Critical => "critical",
        }
    }
}

impl fmt::Display for PacketClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Per-class storage indexed by [`PacketClass::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerClass<T>(pub [T; 4]);

impl<T> PerClass<T> {
    pub fn get(&self, class: PacketClass) -> &T {
        &self.0[class.index()]
    }

    pub fn get_mut(&mut self, class: PacketClass) -> &mut T {
        &mut self.0[class.index()]
    }
}

impl<T: Copy> PerClass<T> {
    pub fn splat(v: T) -> Self {
        PerClass([v; 4])
    }
}

pub type PacketId = u64;

/// A routed datagram.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: PacketId,
    pub class: PacketClass,
    pub source: NodeId,
    pub destination: NodeId,
    /// Remaining time budget in seconds; renewed by each transmitter.
    pub lag_time: f64,
    /// Original end-to-end budget in seconds.
    pub deadline: f64,
    pub payload_size: u32,
    pub creation_time: f64,
    pub hop_count: u32,
    /// Set on a copy re-duplicated toward another sink.
    pub duplicate_of: Option<PacketId>,
    /// Set when some hop had to forward below the required velocity.
    pub missed_velocity: bool,
    /// (node, arrival time) for every node that accepted the packet, source first.
    pub trace: Vec<(NodeId, f64)>,
}

impl Packet {
    pub fn new(
        id: PacketId,
        class: PacketClass,
        source: NodeId,
        destination: NodeId,
        deadline: f64,
        payload_size: u32,
        creation_time: f64,
    ) -> Self {
        Self {
            id,
            class,
            source,
            destination,
            lag_time: deadline,
            deadline,
            payload_size,
            creation_time,
            hop_count: 0,
            duplicate_of: None,
            missed_velocity: false,
            trace: vec![(source, creation_time)],
        }
    }

    /// The logical packet this copy belongs to.
    pub fn logical_id(&self) -> PacketId {
        self.duplicate_of.unwrap_or(self.id)
    }

    /// A copy of this packet addressed to another sink.
    pub fn duplicate_toward(&self, id: PacketId, destination: NodeId) -> Packet {
        Packet {
            id,
            destination,
            duplicate_of: Some(self.logical_id()),
            ..self.clone()
        }
    }
}
