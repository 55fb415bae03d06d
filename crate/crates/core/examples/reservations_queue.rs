//! Soft and hard reservations with their commitment fees, then a station
//! queue with patience, priority and hard entries.
//!
//!     cargo run --example reservations_queue

use evcharge::matching::{commitment_fee, reserve, Queues, ReservationKind, ReservationPolicy};
use evcharge::reference::london_2019;

fn main() -> evcharge::Result<()> {
    let s = london_2019()?;
    let region = s.region()?;
    let mut network = s.network(&region)?;
    let policy = ReservationPolicy::default();
    let station = network
        .stations()
        .iter()
        .find(|st| st.services.reservable && st.connectors.len() >= 2)
        .map(|st| st.id.clone())
        .expect("a reservable station with two connectors");

    let soft = reserve(&mut network, &station, 1, ReservationKind::Soft, 0, 30, &policy)?;
    println!("soft: {station} connector {} until minute {}, fee {:.2}", soft.connector, soft.expiry, soft.fee);
    let hard = reserve(&mut network, &station, 2, ReservationKind::Hard, 0, 90, &policy)?;
    println!("hard: {station} connector {} until minute {}, fee {:.2}", hard.connector, hard.expiry, hard.fee);
    match reserve(&mut network, &station, 3, ReservationKind::Soft, 10, 0, &policy) {
        Ok(_) => println!("unexpected: a zero-hold soft reservation was accepted"),
        Err(e) => println!("zero-hold soft reservation refused: {e}"),
    }
    for minutes in [15, 60, 120, 600] {
        println!(
            "  fee for {minutes:>3} min at 0.30/kWh, 22 kW, cap x{}: {:.2}",
            policy.fee_cap_multiplier,
            commitment_fee(0.30, 22.0, minutes, policy.fee_cap_multiplier)
        );
    }

    // queue with 20 minutes of patience and priority service
    let mut q = Queues::new(20, true);
    q.enqueue(&station, 10, 0);
    q.enqueue(&station, 11, 5);
    q.enqueue(&station, 12, 8);
    println!("queue length {}, agent 12 at position {}", q.len(&station), q.queue_position(&station, 12)?);
    println!("at minute 12 the next served is {:?}", q.notify_next(&station, 12));
    println!("at minute 26 the next served is {:?} (agent 11 gave up)", q.notify_next(&station, 26));
    println!("queue now empty: {}", q.is_empty());
    Ok(())
}
