//! Builds one node's neighbor table from HELLO beacons and lists its
//! favorable forwarders toward a sink.
//!
//! cargo run --example neighbor_tables

use tdthr::estimators::DelayEstimator;
use tdthr::neighborhood::{HelloMessage, LocalView, NeighborTable, TwoHopEntry};
use tdthr::types::PerClass;
use tdthr::{NodeId, PacketClass, Position};

fn entry(id: u32, x: f64, y: f64, prr: f64) -> TwoHopEntry {
    TwoHopEntry {
        id: NodeId(id),
        position: Position::new(x, y),
        dq: PerClass::splat(0.004),
        dt: 0.008,
        prr,
        energy: 1.8,
    }
}

fn hello(sender: u32, x: f64, y: f64, energy: f64, one_hop: Vec<TwoHopEntry>) -> HelloMessage {
    HelloMessage {
        sender: NodeId(sender),
        seq: 1,
        position: Position::new(x, y),
        energy,
        dq: PerClass::splat(0.006),
        // Each neighbor reports how well it hears node 0.
        reverse_prr: vec![(NodeId(0), 0.9)],
        one_hop,
    }
}

fn main() {
    let sink = Position::new(300.0, 0.0);
    let mut table = NeighborTable::new(NodeId(0), 12.5);

    table.process_hello(
        &hello(
            1,
            60.0,
            20.0,
            1.9,
            vec![entry(0, 0.0, 0.0, 0.9), entry(3, 140.0, 10.0, 0.7)],
        ),
        5.0,
    );
    table.process_hello(
        &hello(
            2,
            85.0,
            -30.0,
            1.2,
            vec![entry(3, 140.0, 10.0, 0.95), entry(4, 170.0, -40.0, 0.6)],
        ),
        5.0,
    );
    // Behind node 0 relative to the sink: a neighbor, never a forwarder.
    table.process_hello(&hello(5, -50.0, 0.0, 2.0, vec![]), 5.0);

    let now = 6.0;
    println!("N1 = {:?}", table.one_hop_set(now));
    println!("N2 = {:?}", table.two_hop_set(now));
    println!("F1 = {:?}", table.favorable_one_hop(Position::new(0.0, 0.0), sink, now));

    let delays = DelayEstimator::new(0.5, 0.005, 0.010);
    let me = LocalView {
        id: NodeId(0),
        position: Position::new(0.0, 0.0),
        delays: &delays,
        range: 100.0,
        alpha: 2.0,
        cost_tx: 0.0522,
    };
    for p in table.favorable_pairs(&me, sink, PacketClass::Critical, now) {
        println!(
            "pair {}->{}: progress {:5.1} m, velocity {:6.0} m/s, path prr {:.3}, power score {:.1}",
            p.y, p.z, p.progress, p.velocity, p.prr_path, p.power_score
        );
    }

    // Without a fresh beacon the neighbors age out.
    let gone = table.evict_expired(20.0);
    println!("expired at t=20: {gone:?}");
}
