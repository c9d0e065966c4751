//! One desk-scale simulation: 100 nodes on 600 m x 600 m for 120 s.
//! Prints the metrics summary and the first lines of the event trace.
//!
//! cargo run --release --example desk_run -- [seed]

use tdthr::sim::{run_traced, SimConfig};

fn main() -> tdthr::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = SimConfig::desk();
    cfg.rng_seed = seed;
    cfg.validate()?;

    let out = run_traced(&cfg)?;
    let topo = &out.topology;
    println!(
        "{} nodes, source {} at {:?}, sinks {:?} (placement attempt {})",
        topo.len(),
        topo.source,
        topo.position(topo.source),
        topo.sinks,
        topo.attempt
    );
    println!("{}", out.ledger.summary());
    println!(
        "energy {} (control {}), {} deaths, first at {:?}",
        out.ledger.total_energy_spent, out.ledger.control_energy, out.ledger.deaths, out.ledger.first_death_time
    );

    let trace = out.trace.unwrap_or_default();
    let data: Vec<&str> = trace.lines().filter(|l| !l.contains(" hello ")).take(12).collect();
    println!("first data-plane events:\n{}", data.join("\n"));
    Ok(())
}
