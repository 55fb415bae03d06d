//! Valley filling against uncontrolled charging on an evening arrival wave.
//!
//!     cargo run --example smart_charging

use evcharge::scheduler::{load_metrics, uncontrolled_load, valley_fill, LoadCurve, Session};

fn main() -> evcharge::Result<()> {
    // one day in hourly slots, evening peak in the base load
    let base = LoadCurve::new(
        60,
        vec![
            52.0, 48.0, 46.0, 45.0, 46.0, 52.0, 66.0, 80.0, 85.0, 83.0, 80.0, 80.0, 80.0, 78.0, 77.0, 80.0, 90.0, 95.0,
            95.0, 90.0, 83.0, 75.0, 66.0, 57.0,
        ],
    );
    let sessions: Vec<Session> = (0..10)
        .map(|i| Session {
            agent_id: i,
            plug_in: 17 + (i as usize % 3),
            departure: 24,
            energy_needed: 12.0 + i as f64,
            max_power: 7.0,
            v2g_capable: false,
            soc: 0.3,
            desired_soc: 0.3 + (12.0 + i as f64) / 50.0,
            min_soc: 0.2,
            battery_capacity: 50.0,
            discharges_used_this_year: 0,
            degradation_cost: 0.001,
        })
        .collect();

    let (unc, short) = uncontrolled_load(&sessions, &base)?;
    let vf = valley_fill(&sessions, &base, None, 0.1)?;
    let (mu, mv) = (load_metrics(&unc)?, load_metrics(&vf.total)?);
    println!("slot  base  uncontrolled  valley-fill");
    for h in 15..24 {
        println!("{h:>4} {:>5.1} {:>13.1} {:>12.1}", base.values[h], unc.values[h], vf.total.values[h]);
    }
    println!("peak      {:.1} -> {:.1} kW", mu.peak, mv.peak);
    println!("variance  {:.1} -> {:.1}", mu.variance, mv.variance);
    println!("sessions short of energy under uncontrolled charging: {short:?}");
    for a in vf.assignments.iter().take(3) {
        let kwh: f64 = a.power.iter().sum();
        let evening: Vec<String> = a.power[17..24].iter().map(|p| format!("{p:.2}")).collect();
        println!("agent {} draws {kwh:.2} kWh, slots 17-23: {}", a.agent_id, evening.join(" "));
    }
    match valley_fill(&sessions, &base, Some(90.0), 0.1) {
        Ok(s) => println!("90 kW limit: feasible, peak {:.1}", load_metrics(&s.total)?.peak),
        Err(e) => println!("90 kW limit: {e}"),
    }
    Ok(())
}
