//! Runs the per-class forwarding decision on one neighborhood snapshot,
//! for TDTHR and the two comparison routers.
//!
//! cargo run --example next_hop_selection

use tdthr::estimators::DelayEstimator;
use tdthr::forwarding::{decide, CriticalPrrScope, Protocol, RouteRequest, RoutingPolicy};
use tdthr::neighborhood::{HelloMessage, LocalView, NeighborTable, TwoHopEntry};
use tdthr::types::PerClass;
use tdthr::{NodeId, PacketClass, Position};

fn main() {
    let sink = Position::new(400.0, 0.0);
    let mut table = NeighborTable::new(NodeId(0), 12.5);
    // (id, position, energy, prr from 0, onward neighbor, its prr)
    let layout = [
        (1, (30.0, 5.0), 1.9, 0.95, (110.0, 0.0), 0.9),
        (2, (70.0, 10.0), 2.0, 0.80, (160.0, 5.0), 0.99),
        (3, (95.0, -5.0), 0.6, 0.60, (190.0, 0.0), 0.7),
    ];
    for (id, (x, y), energy, prr, (zx, zy), prr_yz) in layout {
        let z = TwoHopEntry {
            id: NodeId(10 + id),
            position: Position::new(zx, zy),
            dq: PerClass::splat(0.004),
            dt: 0.009,
            prr: prr_yz,
            energy: 2.0,
        };
        let beacon = HelloMessage {
            sender: NodeId(id),
            seq: 0,
            position: Position::new(x, y),
            energy,
            dq: PerClass::splat(0.005),
            reverse_prr: vec![(NodeId(0), prr)],
            one_hop: vec![z],
        };
        table.process_hello(&beacon, 1.0);
    }

    let delays = DelayEstimator::new(0.5, 0.004, 0.010);
    let me = LocalView {
        id: NodeId(0),
        position: Position::new(0.0, 0.0),
        delays: &delays,
        range: 100.0,
        alpha: 2.0,
        cost_tx: 0.0522,
    };

    for lag_time in [0.30, 0.05] {
        println!("lag time {lag_time} s (required velocity {:.0} m/s)", 400.0 / lag_time);
        for protocol in Protocol::ALL {
            let policy = RoutingPolicy {
                protocol,
                critical_prr_scope: CriticalPrrScope::TwoHop,
            };
            let picks: Vec<String> = PacketClass::ALL
                .iter()
                .map(|&class| {
                    let req = RouteRequest {
                        class,
                        lag_time,
                        destination: NodeId(99),
                        destination_position: sink,
                        now: 2.0,
                    };
                    match decide(&policy, &me, &table, &req) {
                        Ok(d) if d.missed_velocity => format!("{}={} (too slow)", class.short_name(), d.next_hop),
                        Ok(d) => format!("{}={}", class.short_name(), d.next_hop),
                        Err(e) => format!("{}: {e}", class.short_name()),
                    }
                })
                .collect();
            println!("  {:<17} {}", protocol.name(), picks.join("  "));
        }
    }
}
