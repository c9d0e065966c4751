//! Traffic-differentiated two-hop QoS routing for wireless sensor networks.
//!
//! The crate has two halves. The protocol half ([`estimators`],
//! [`neighborhood`], [`forwarding`], [`queueing`]) is a set of pure,
//! per-node building blocks. The simulation half ([`sim`], [`metrics`],
//! [`sweep`]) wires them into a deterministic discrete-event network and
//! reports delivery ratio, delay, energy per packet and lifetime.
//!
//! ```no_run
//! use tdthr::sim::{run, SimConfig};
//!
//! let cfg = SimConfig::desk();
//! let ledger = run(&cfg).unwrap();
//! println!("{}", ledger.summary());
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod forwarding;
pub mod geometry;
pub mod metrics;
pub mod neighborhood;
pub mod queueing;
pub mod sim;
pub mod sweep;
pub mod types;

pub use error::{Error, Result};
pub use geometry::{dist, Position};
pub use types::{NodeId, Packet, PacketClass, PacketId};
