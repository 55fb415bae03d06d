//! Borough-level charging need against public supply for the reference
//! scenario, with the per-EV need optionally forced from the command line.
//!
//!     cargo run --example estimate_london [kwh_per_ev_day]

use evcharge::estimator::estimate;
use evcharge::reference::london_2019;

fn main() -> evcharge::Result<()> {
    let mut s = london_2019()?;
    s.estimator.per_ev_kwh_day = std::env::args().nth(1).and_then(|v| v.parse().ok());
    let region = s.region()?;
    let network = s.network(&region)?;
    let r = estimate(&s.name, &region, &network, &s.estimator)?;

    let mut rows = r.boroughs.clone();
    rows.sort_by(|a, b| a.dos.total_cmp(&b.dos));
    println!("{:<24} {:>6} {:>7} {:>10} {:>10} {:>6}", "borough", "zone", "EVs", "need", "capacity", "dos");
    for b in rows.iter().take(10) {
        println!(
            "{:<24} {:>6} {:>7} {:>10.0} {:>10.0} {:>6.3}",
            b.name, b.zone, b.ev_count, b.need_kwh_day, b.capacity_kwh_day, b.dos
        );
    }
    println!("... {} more", rows.len().saturating_sub(10));
    let a = &r.aggregate;
    println!("per EV        {:.3} kWh/day", a.per_ev_kwh_day);
    println!("fleet need    {:.0} kWh/day over {} EVs", a.fleet_need_kwh_day, a.ev_count);
    println!("capacity      {:.0} kWh/day", a.capacity_kwh_day);
    println!(
        "satisfied     {:.0} kWh/day, {:.1}% ({:.0} EV equivalents)",
        a.satisfied_kwh_day,
        100.0 * a.dos,
        a.satisfied_ev_equivalent
    );
    Ok(())
}
