//! Sweeps the critical packet share from 0.1 to 1.0 for TDTHR and greedy
//! forwarding and writes runs.csv plus one plot file per metric.
//!
//! cargo run --release --example critical_rate_sweep -- [out-dir]

use tdthr::forwarding::Protocol;
use tdthr::sim::SimConfig;
use tdthr::sweep::{plot_points, write_outputs, Metric, Sweep};
use tdthr::PacketClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep-out".into());
    let values: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let sweep = Sweep::new(
        SimConfig::desk(),
        "traffic.critical_rate",
        values,
        (0..5).collect(),
        vec![Protocol::Tdthr, Protocol::GreedyGeo],
    );
    sweep.validate()?;
    println!("{} runs", sweep.run_count());
    let records = sweep.run();
    write_outputs(out.as_ref(), &sweep, &records)?;

    for metric in [Metric::Prr(PacketClass::Critical), Metric::Lifetime] {
        println!("{}", metric.name());
        for p in plot_points(&records, metric) {
            println!(
                "  {:<10} x={:.1} mean {:.4} [{:.4}, {:.4}] n={}",
                p.protocol.name(),
                p.x,
                p.mean,
                p.min,
                p.max,
                p.n
            );
        }
    }
    println!("wrote {out}/runs.csv and plot files");
    Ok(())
}
