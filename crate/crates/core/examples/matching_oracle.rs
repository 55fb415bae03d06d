//! Greedy first-come matching against the optimal batch assignment on a
//! small contested instance, checked against brute force.
//!
//!     cargo run --example matching_oracle

use evcharge::demand::{ChargeRequest, RequestKind};
use evcharge::domain::{Location, RateClass};
use evcharge::matching::{allocate_greedy, allocate_optimal, min_cost_assignment, total_walk, MatchOutcome, MatchParams};
use evcharge::scenario::parse_scenario;

const WORLD: &str = r#"
population_size = 0

[[region.boroughs]]
borough_id = "A"
name = "Alpha"
zone = "inner"
ev_count = 10
poi_count = 1
area_km2 = 4.0

[[stations.station]]
station_id = "NEAR"
operator_id = "op1"
borough_id = "A"
x_km = 0.0
y_km = 0.0
premises = "on_street"
sockets = "Type2:7"
reservable = false
charge_rate = 0.3
restricted = false
roaming = true
surcharge = 0.0
reserved_parking = 0

[[stations.station]]
station_id = "FAR"
operator_id = "op1"
borough_id = "A"
x_km = 0.9
y_km = 0.0
premises = "on_street"
sockets = "Type2:7"
reservable = false
charge_rate = 0.3
restricted = false
roaming = true
surcharge = 0.0
reserved_parking = 0
"#;

fn request(agent: u32, x: f64, max_walk: f64) -> ChargeRequest {
    ChargeRequest {
        agent_id: agent,
        time: 0,
        destination: Location::new(x, 0.0, "A"),
        energy_needed: 10.0,
        rate_class_wanted: RateClass::Slow,
        max_walk,
        subscriptions: ["op1".to_string()].into(),
        sockets: ["Type2".to_string()].into(),
        soc: 0.3,
        kind: RequestKind::Threshold,
    }
}

fn show(label: &str, outcomes: &[MatchOutcome]) {
    println!("{label}:");
    for o in outcomes {
        match o {
            MatchOutcome::Allocated(a) => println!(
                "  agent {} -> {} ({:.1} min walk)",
                a.request.agent_id, a.station_id, a.walk_minutes
            ),
            MatchOutcome::Rejected(r) => println!("  agent {} rejected: {}", r.request.agent_id, r.reason.as_str()),
        }
    }
    println!("  total walk {:.1} min", total_walk(outcomes));
}

fn main() -> evcharge::Result<()> {
    let s = parse_scenario(WORLD)?;
    let region = s.region()?;
    let network = s.network(&region)?;
    let params = MatchParams { walk_speed_kmh: 5.0, roaming: true };

    // agent 0 arrives first and could walk anywhere; agent 1 only reaches NEAR
    let batch = vec![request(0, 0.4, 15.0), request(1, -0.3, 5.0)];
    show("greedy", &allocate_greedy(&batch, &mut network.clone(), 0, &params));
    show("optimal", &allocate_optimal(&batch, &network, &params)?);

    // the assignment core on a raw cost matrix; None marks an infeasible pair
    let cost = vec![vec![Some(4.8), Some(6.0)], vec![Some(3.6), None]];
    let (assign, walk) = min_cost_assignment(&cost);
    let mut best = f64::INFINITY;
    for (a, b) in [(0, 1), (1, 0)] {
        if let (Some(x), Some(y)) = (cost[0][a], cost[1][b]) {
            best = best.min(x + y);
        }
    }
    println!("matrix: assignment {assign:?}, cost {walk:.1}; brute force {best:.1}");
    Ok(())
}
