//! The three-queue controller: strict priority, with aged packets promoted
//! to the critical queue when their timer fires.
//!
//! cargo run --example priority_queues

use tdthr::queueing::{PromotionRule, QueueBank, QueueKind};
use tdthr::{NodeId, Packet, PacketClass};

fn main() {
    let mut bank = QueueBank::priority(16, PromotionRule::default());
    let mut timers = Vec::new();

    let arrivals = [
        (1, PacketClass::Regular, 0.000),
        (2, PacketClass::DelayResponsive, 0.001),
        (3, PacketClass::ReliabilityResponsive, 0.002),
        (4, PacketClass::Critical, 0.003),
    ];
    for (id, class, t) in arrivals {
        let mut p = Packet::new(id, class, NodeId(0), NodeId(1), 0.3, 150, t);
        p.lag_time = 0.3 - 0.1 * id as f64 / 2.0;
        if let Some(expiry) = bank.enqueue(p, t).unwrap() {
            println!("packet {id} ({class}) armed a promotion timer for t={expiry:.3}");
            timers.push((id, expiry));
        }
    }

    // The MAC is busy until t=0.12, so the earliest timers fire first.
    timers.sort_by(|a, b| a.1.total_cmp(&b.1));
    for &(id, expiry) in timers.iter().filter(|(_, e)| *e <= 0.12) {
        if bank.on_timer_expire(id, expiry) {
            println!("t={expiry:.3}: packet {id} promoted");
        }
    }
    let critical: Vec<u64> = bank.queue(QueueKind::Critical).iter().map(|e| e.packet.id).collect();
    println!("critical queue now {critical:?}");

    let mut now = 0.12;
    while let Some(d) = bank.dequeue_next(now) {
        println!(
            "t={now:.3}: send packet {} ({}), waited {:.3} s{}",
            d.packet.id,
            d.packet.class,
            d.wait,
            if d.promoted { ", promoted" } else { "" }
        );
        now += 0.006;
    }
    // Timers of packets already sent do nothing.
    for (id, expiry) in timers {
        assert!(!bank.on_timer_expire(id, expiry));
    }
    println!("{:?}", bank.counters());
}
