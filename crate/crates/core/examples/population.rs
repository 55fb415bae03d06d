//! Samples a synthetic population from the reference behaviour distributions
//! and summarises it, then draws one week of charge requests.
//!
//!     cargo run --example population [size]

use std::collections::BTreeMap;

use evcharge::demand::{build_population, generate_requests, RequestKind};
use evcharge::reference::london_2019;

fn share<K: Ord>(counts: &BTreeMap<K, usize>, n: usize) -> Vec<(&K, f64)> {
    counts.iter().map(|(k, c)| (k, *c as f64 / n as f64)).collect()
}

fn main() -> evcharge::Result<()> {
    let mut s = london_2019()?;
    s.population_size = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(2000);
    let agents = build_population(&s, s.seed)?;
    let n = agents.len();

    let home = agents.iter().filter(|a| a.preference.has_home_charger).count();
    println!("{n} agents, {:.1}% with a home charger", 100.0 * home as f64 / n as f64);

    let mut makes = BTreeMap::new();
    let mut periods = BTreeMap::new();
    for a in &agents {
        *makes.entry(a.vehicle.make_id.clone()).or_insert(0) += 1;
        *periods.entry(format!("{:?}", a.behaviour.preferred_period)).or_insert(0) += 1;
    }
    for (k, p) in share(&makes, n) {
        println!("  make   {k:<28} {:.3}", p);
    }
    for (k, p) in share(&periods, n) {
        println!("  period {k:<28} {:.3}", p);
    }
    let threshold: f64 = agents.iter().map(|a| a.behaviour.start_threshold).sum::<f64>() / n as f64;
    println!("mean start threshold {threshold:.3}");

    let requests = generate_requests(&s, &agents, 7, s.seed)?;
    let planned = requests.iter().filter(|r| r.kind == RequestKind::Planned).count();
    let energy: f64 = requests.iter().map(|r| r.energy_needed).sum();
    println!(
        "{} public requests in 7 days ({planned} planned, {} below threshold), {energy:.0} kWh",
        requests.len(),
        requests.len() - planned
    );
    Ok(())
}
