//! A hand-placed relay line with perfect links and full-range hops. With
//! the published per-packet energy costs the relay runs dry after
//! floor(2.0 / (0.0522 + 0.0591)) = 17 forwards.
//!
//! cargo run --example scripted_line

use tdthr::sim::{run_traced, LinkModel, SimConfig};
use tdthr::Position;

fn main() -> tdthr::Result<()> {
    let mut cfg = SimConfig::desk();
    cfg.field.width = 200.0;
    cfg.field.height = 10.0;
    cfg.field.node_count = 3;
    cfg.field.density = None;
    cfg.field.nodes = vec![Position::new(100.0, 0.0)];
    cfg.sinks = vec![Position::new(0.0, 0.0)];
    cfg.traffic.source = Some(Position::new(200.0, 0.0));
    cfg.traffic.critical_rate = 0.0;
    cfg.link = LinkModel::Perfect;
    cfg.duration = 30.0;

    let out = run_traced(&cfg)?;
    let trace = out.trace.unwrap_or_default();
    let relay = out.topology.len() - 1;
    let forwards = trace
        .lines()
        .filter(|l| l.split_whitespace().nth(1) == Some(relay.to_string().as_str()) && l.contains(" transmit "))
        .count();
    let per_forward = cfg.energy.tx + cfg.energy.rx;
    println!(
        "relay forwarded {forwards} packets; budget allows {}",
        (cfg.energy.initial / per_forward).floor()
    );
    for line in trace.lines().filter(|l| l.contains(" death ")) {
        println!("{line}");
    }
    println!("{}", out.ledger.summary());
    Ok(())
}
