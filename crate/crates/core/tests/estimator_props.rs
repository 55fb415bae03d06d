use std::collections::BTreeMap;

use evcharge::domain::{Borough, Zone};
use evcharge::estimator::{
    avg_daily_energy_per_ev, combined_need_distribution, degree_of_satisfaction, destination_weights, estimate,
    home_weights, BoroughMap, EnergyAssumptions,
};
use evcharge::reference;
use proptest::prelude::*;

fn borough(i: usize, ev: u64, poi: u64) -> Borough {
    Borough {
        id: format!("B{i:02}"),
        name: format!("B{i:02}"),
        zone: Zone::Outer,
        ev_count: ev,
        poi_count: poi,
        area: 1.0,
        centroid: None,
        poi_weight: 1.0,
    }
}

fn boroughs(counts: &[(u64, u64)]) -> Vec<Borough> {
    counts
        .iter()
        .enumerate()
        .map(|(i, (e, p))| borough(i, *e, *p))
        .collect()
}

fn keyed(values: &[f64]) -> BoroughMap {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("B{i:02}"), *v))
        .collect()
}

fn counts() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0u64..50_000, 0u64..5_000), 1..40)
        .prop_filter("positive EV total", |v| v.iter().map(|c| c.0).sum::<u64>() > 0)
}

proptest! {
    #[test]
    fn weights_sum_to_one(c in counts()) {
        let b = boroughs(&c);
        let h: f64 = home_weights(&b).unwrap().values().sum();
        let d: f64 = destination_weights(&b).values().sum();
        prop_assert!((h - 1.0).abs() <= 1e-9, "home {}", h);
        prop_assert!((d - 1.0).abs() <= 1e-9, "dest {}", d);
    }

    #[test]
    fn combined_need_is_conserved(c in counts(), alpha in 0.0f64..=1.0, fleet in 0.0f64..1e7) {
        let b = boroughs(&c);
        let need = combined_need_distribution(&home_weights(&b).unwrap(), &destination_weights(&b), alpha, fleet).unwrap();
        let total: f64 = need.values().sum();
        prop_assert!((total - fleet).abs() <= 1e-6, "{} vs {}", total, fleet);
    }

    #[test]
    fn doubling_one_factor_doubles_the_need(which in 0usize..4, f in 0.3f64..0.9, km in 1e6f64..1e10) {
        let base = EnergyAssumptions {
            total_km_year: km,
            n_vehicles: 12_345,
            allow_extreme_factors: true,
            temperature_factor: 1.05,
            driving_behaviour_factor: 0.95,
            range_anxiety_factor: 1.1,
            drivetrain_factor: 0.9,
            ..EnergyAssumptions::default()
        };
        let set = |a: &mut EnergyAssumptions, v: f64| match which {
            0 => a.temperature_factor = v,
            1 => a.driving_behaviour_factor = v,
            2 => a.range_anxiety_factor = v,
            _ => a.drivetrain_factor = v,
        };
        let mut one = base.clone();
        set(&mut one, f);
        let mut two = base.clone();
        set(&mut two, 2.0 * f);
        let e1 = avg_daily_energy_per_ev(&one).unwrap();
        let e2 = avg_daily_energy_per_ev(&two).unwrap();
        prop_assert!((e2 - 2.0 * e1).abs() <= 1e-12 * e2.abs().max(1.0), "{} vs 2x{}", e2, e1);
    }
}

fn need_capacity() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize, f64)> {
    (1usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e4], n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e4], n),
            0..n,
            0.0f64..5e3,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn satisfaction_is_bounded_and_monotone((need, cap, k, bump) in need_capacity()) {
        let base = degree_of_satisfaction(&keyed(&need), &keyed(&cap)).unwrap();
        prop_assert!((0.0..=1.0).contains(&base.aggregate));
        prop_assert!(base.per_borough.values().all(|v| (0.0..=1.0).contains(v)));

        let mut more_cap = cap.clone();
        more_cap[k] += bump;
        let up = degree_of_satisfaction(&keyed(&need), &keyed(&more_cap)).unwrap();
        let mut more_need = need.clone();
        more_need[k] += bump;
        let down = degree_of_satisfaction(&keyed(&more_need), &keyed(&cap)).unwrap();
        for key in base.per_borough.keys() {
            prop_assert!(up.per_borough[key] >= base.per_borough[key]);
            prop_assert!(down.per_borough[key] <= base.per_borough[key]);
        }
        prop_assert!(up.aggregate >= base.aggregate - 1e-12);

        let equal = degree_of_satisfaction(&keyed(&need), &keyed(&need)).unwrap();
        prop_assert_eq!(equal.aggregate, 1.0);
        prop_assert!(equal.per_borough.values().all(|v| *v == 1.0));
    }
}

#[test]
fn two_zone_home_weights() {
    let w = home_weights(&boroughs(&[(16_740, 0), (21_827, 0)])).unwrap();
    assert!((w["B00"] - 16_740.0 / 38_567.0).abs() <= 1e-9);
    assert!((w["B01"] - 21_827.0 / 38_567.0).abs() <= 1e-9);
    assert!((w["B00"] - 0.43405).abs() < 1e-5);
}

/// Spreadsheet-style recomputation straight from the shipped CSV text.
struct Sheet {
    ev: BTreeMap<String, f64>,
    poi: BTreeMap<String, f64>,
    kw: BTreeMap<String, f64>,
}

fn sheet() -> Sheet {
    let mut s = Sheet {
        ev: BTreeMap::new(),
        poi: BTreeMap::new(),
        kw: BTreeMap::new(),
    };
    for line in reference::BOROUGHS_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let id = cols[0].to_string();
        s.ev.insert(id.clone(), cols[3].parse().unwrap());
        let weight: f64 = cols[8].parse().unwrap();
        s.poi.insert(id.clone(), cols[4].parse::<f64>().unwrap() * weight);
        s.kw.insert(id, 0.0);
    }
    for line in reference::STATIONS_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        let kw: f64 = cols[6]
            .split(';')
            .map(|s| s.split(':').nth(1).unwrap().parse::<f64>().unwrap())
            .sum();
        *s.kw.get_mut(cols[2]).unwrap() += kw;
    }
    s
}

#[test]
fn estimate_matches_an_independent_recomputation() {
    let sc = reference::london_2019().unwrap();
    let cfg = &sc.estimator;
    let region = sc.region().unwrap();
    let network = sc.network(&region).unwrap();
    let report = estimate(&sc.name, &region, &network, cfg).unwrap();

    let a = &cfg.assumptions;
    let per_ev = cfg.per_ev_kwh_day.unwrap_or(
        a.total_km_year / a.n_vehicles as f64
            * a.kwh_per_km_base
            * a.temperature_factor
            * a.driving_behaviour_factor
            * a.range_anxiety_factor
            * a.drivetrain_factor
            / 365.0,
    );
    let s = sheet();
    let ev_total: f64 = s.ev.values().sum();
    let poi_total: f64 = s.poi.values().sum();
    let fleet = per_ev * ev_total;
    let mut satisfied = 0.0;
    let mut need_total = 0.0;
    assert_eq!(report.boroughs.len(), s.ev.len());
    for b in &report.boroughs {
        let id = &b.borough_id;
        let home = s.ev[id] / ev_total;
        let dest = s.poi[id] / poi_total;
        let need = fleet * (cfg.alpha * home + (1.0 - cfg.alpha) * dest);
        let cap = s.kw[id] * cfg.hours_per_day * cfg.utilization;
        let dos = if need <= 0.0 { 1.0 } else { (cap / need).min(1.0) };
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        assert!(close(b.home_weight, home), "{id} home");
        assert!(close(b.dest_weight, dest), "{id} dest");
        assert!(close(b.need_kwh_day, need), "{id} need {} vs {need}", b.need_kwh_day);
        assert!(close(b.capacity_kwh_day, cap), "{id} capacity");
        assert!(close(b.dos, dos), "{id} dos");
        satisfied += need.min(cap);
        need_total += need;
    }
    let agg = &report.aggregate;
    assert!((agg.fleet_need_kwh_day - fleet).abs() <= 1e-9 * fleet);
    assert!((agg.satisfied_kwh_day - satisfied).abs() <= 1e-9 * satisfied.max(1.0));
    assert!((agg.dos - satisfied / need_total).abs() <= 1e-9);
    assert!((agg.satisfied_ev_equivalent - satisfied / per_ev).abs() <= 1e-9 * agg.satisfied_ev_equivalent);
}

#[test]
fn reference_fleet_need_at_four_kwh() {
    let mut sc = reference::london_2019().unwrap();
    sc.estimator.per_ev_kwh_day = Some(4.0);
    let region = sc.region().unwrap();
    let network = sc.network(&region).unwrap();
    let report = estimate(&sc.name, &region, &network, &sc.estimator).unwrap();
    assert_eq!(report.aggregate.ev_count, 38_632);
    assert_eq!(report.aggregate.fleet_need_kwh_day, 154_528.0);
}
