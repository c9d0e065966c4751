//! Paired-seed comparison of TDTHR against the one-hop velocity router and
//! greedy geographic forwarding on a mixed QoS workload.
//!
//! cargo run --release --example baseline_comparison

use tdthr::forwarding::Protocol;
use tdthr::metrics::MetricsLedger;
use tdthr::sim::{run, SimConfig};
use tdthr::PacketClass;

fn mean(xs: impl Iterator<Item = Option<f64>>) -> String {
    let v: Vec<f64> = xs.flatten().collect();
    if v.is_empty() {
        "-".into()
    } else {
        format!("{:.4}", v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn main() -> tdthr::Result<()> {
    let mut base = SimConfig::desk();
    base.traffic.critical_rate = 0.25;
    base.traffic.delay_responsive_rate = 0.25;
    base.traffic.reliability_responsive_rate = 0.25;
    // Large batteries keep the comparison about routing rather than depletion.
    base.energy.initial = 1.0e4;

    println!(
        "{:<17} {:>9} {:>9} {:>9} {:>10} {:>10}",
        "protocol", "prr crit", "prr rel", "prr reg", "delay dr", "ecpp"
    );
    for protocol in Protocol::ALL {
        let ledgers: Vec<MetricsLedger> = (0..5)
            .map(|seed| {
                let mut cfg = base.clone();
                cfg.rng_seed = seed;
                cfg.routing.protocol = protocol;
                run(&cfg)
            })
            .collect::<tdthr::Result<_>>()?;
        let prr = |c| mean(ledgers.iter().map(|l| l.prr(c)));
        println!(
            "{:<17} {:>9} {:>9} {:>9} {:>10} {:>10}",
            protocol.name(),
            prr(PacketClass::Critical),
            prr(PacketClass::ReliabilityResponsive),
            prr(PacketClass::Regular),
            mean(
                ledgers
                    .iter()
                    .map(|l| l.mean_delay(PacketClass::DelayResponsive).map(|d| d.mean))
            ),
            mean(ledgers.iter().map(|l| l.ecpp())),
        );
    }
    Ok(())
}
