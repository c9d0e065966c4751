//! Deterministic discrete-event simulation of a sensor field.

pub mod config;
mod engine;
pub mod topology;

pub use config::{LifetimeDefinition, LinkModel, SimConfig};
pub use engine::{run, run_traced, RunOutput};
pub use topology::{generate_topology, Topology};
