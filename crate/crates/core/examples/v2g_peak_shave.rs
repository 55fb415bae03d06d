//! Vehicle-to-grid peak shaving: which owners take part at a given price,
//! how far the peak comes down and what it pays.
//!
//!     cargo run --example v2g_peak_shave [offered_price_per_mwh]

use evcharge::scheduler::{
    load_metrics, peak_shave_v2g, soc_trace, v2g_participation, LoadCurve, Session, DEFAULT_ANNUAL_DISCHARGE_CAP,
    DEFAULT_PRICE_FLOOR,
};

fn main() -> evcharge::Result<()> {
    let price: f64 = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(5.0);
    let base = LoadCurve::new(
        60,
        vec![
            52.0, 48.0, 46.0, 45.0, 46.0, 52.0, 66.0, 80.0, 85.0, 83.0, 80.0, 80.0, 80.0, 78.0, 77.0, 80.0, 90.0, 95.0,
            95.0, 90.0, 83.0, 75.0, 66.0, 57.0,
        ],
    );
    let mut sessions: Vec<Session> = (0..8)
        .map(|i| Session {
            agent_id: i,
            plug_in: 16,
            departure: 24,
            energy_needed: 4.0,
            max_power: 7.0,
            v2g_capable: i % 4 != 3,
            soc: 0.8,
            desired_soc: 0.88,
            min_soc: 0.3,
            battery_capacity: 50.0,
            discharges_used_this_year: 6 * i,
            degradation_cost: 0.001,
        })
        .collect();
    for s in &mut sessions {
        s.v2g_capable = v2g_participation(price, DEFAULT_PRICE_FLOOR, s, DEFAULT_ANNUAL_DISCHARGE_CAP);
    }
    let willing = sessions.iter().filter(|s| s.v2g_capable).count();
    println!("offered {price} per MWh, floor {DEFAULT_PRICE_FLOOR}: {willing} of {} vehicles take part", sessions.len());

    let threshold = 85.0;
    let sched = peak_shave_v2g(&sessions, &base, threshold, DEFAULT_ANNUAL_DISCHARGE_CAP)?;
    let before = load_metrics(&base)?;
    let after = load_metrics(&sched.total)?;
    let kwh = sched.discharged_energy();
    println!("peak {:.1} -> {:.1} kW, threshold {threshold}", before.peak, after.peak);
    println!("slots still above threshold: {:?}", sched.unshaved_slots);
    println!("discharged {kwh:.2} kWh by agents {:?}", sched.discharged);
    println!("payment {:.4}, wear {:.4}", kwh * price / 1000.0, kwh * 0.001);
    for (s, a) in sessions.iter().zip(&sched.assignments).take(3) {
        let trace = soc_trace(s, a, base.slot_hours());
        println!(
            "agent {} soc {:.3} -> min {:.3} -> {:.3} at departure (target {:.3})",
            s.agent_id,
            s.soc,
            trace.iter().cloned().fold(1.0, f64::min),
            trace.last().unwrap(),
            s.desired_soc
        );
    }
    Ok(())
}
