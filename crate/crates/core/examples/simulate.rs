//! Runs the reference scenario once and prints the headline numbers.
//!
//!     cargo run --release --example simulate [seed]

use std::time::Instant;

use evcharge::engine::run;
use evcharge::reference::london_2019;

fn main() -> evcharge::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let scenario = london_2019()?;
    let t = Instant::now();
    let r = run(&scenario, seed)?;
    println!(
        "{} agents, {} days, policy {}, seed {seed}",
        r.agents,
        r.horizon_days,
        r.policy.as_str()
    );
    println!("requests     {}", r.requests);
    println!(
        "allocated    {} ({:.1}%)",
        r.allocations.len(),
        100.0 * r.acceptance_rate()
    );
    println!("rejected     {}", r.rejections.len());
    for (reason, n) in &r.rejections_by_reason {
        println!("  {reason:<20} {n}");
    }
    println!("mean walk    {:.2} min", r.mean_walk_minutes());
    println!("mean wait    {:.2} min", r.mean_wait_minutes());
    println!(
        "queued       {} (served {}, timed out {})",
        r.queue.enqueued, r.queue.served, r.queue.timed_out
    );
    println!(
        "offers       {} tendered, {} accepted",
        r.offers.tendered, r.offers.accepted
    );
    println!("public kWh   {:.0}", r.delivered_energy_kwh);
    println!(
        "home kWh     {:.0} over {} sessions",
        r.home_energy_kwh, r.home_sessions
    );
    for d in &r.schedules {
        println!(
            "day {}: {} sessions, peak {:.0} -> valley {} / v2g {:.0} kW, {:.1} kWh discharged",
            d.day,
            d.sessions,
            d.uncontrolled.peak,
            d.valley_fill
                .as_ref()
                .map_or("infeasible".to_string(), |m| format!("{:.0}", m.peak)),
            d.v2g.peak,
            d.discharged_kwh
        );
    }
    eprintln!("elapsed {:.2?}", t.elapsed());
    Ok(())
}
