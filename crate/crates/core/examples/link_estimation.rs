//! Tracks a lossy link with the window-mean PRR estimator and folds
//! measured hop times into the delay estimator.
//!
//! cargo run --example link_estimation

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdthr::estimators::{DelayEstimator, PrrEstimator, SeqGapTracker};
use tdthr::{NodeId, PacketClass};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut prr = PrrEstimator::new(1.0, 30, 0.6);
    let mut gaps = SeqGapTracker::default();

    // The link delivers 80% of frames for a while, then degrades to 40%.
    for seq in 0..1800u64 {
        let p = if seq < 900 { 0.8 } else { 0.4 };
        if rng.gen::<f64>() >= p {
            continue;
        }
        // The receiver only sees what arrives; misses show up as sequence gaps.
        let missed = gaps.observe(seq).unwrap_or(0);
        for _ in 0..missed {
            prr.record_missed();
        }
        if let Some(estimate) = prr.record_received() {
            if seq % 300 < 30 {
                println!("frame {seq:>4}: true {p:.1}, estimate {estimate:.3}");
            }
        }
    }

    let mut delays = DelayEstimator::new(0.5, 0.0, 0.005);
    for wait in [0.004, 0.012, 0.030, 0.008] {
        delays.dq_update(PacketClass::Critical, wait).unwrap();
    }
    let t_s = 20.0;
    for hop in [0.006, 0.009, 0.015] {
        delays
            .dt_update(NodeId(4), t_s, t_s + hop + 12.0 * 8.0 / 250_000.0, 12, 250_000.0)
            .unwrap();
    }
    println!(
        "critical queueing delay {:.4} s, transmission delay to node 4 {:.4} s",
        delays.dq(PacketClass::Critical),
        delays.dt(NodeId(4))
    );
}
