//! Macroscopic estimate of public charging need and how much of it the
//! network can cover, borough by borough.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Borough, Region};
use crate::error::{Error, Result};
use crate::supply::{ConnectorState, Network};

/// Borough id → value. Ordered so reports are stable.
pub type BoroughMap = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyAssumptions {
    /// Kilometres driven per year by the whole fleet.
    pub total_km_year: f64,
    pub n_vehicles: u64,
    pub kwh_per_km_base: f64,
    pub temperature_factor: f64,
    pub driving_behaviour_factor: f64,
    pub range_anxiety_factor: f64,
    pub drivetrain_factor: f64,
    /// Lifts the (0.5, 2.0) range check on the four factors.
    pub allow_extreme_factors: bool,
}

impl Default for EnergyAssumptions {
    fn default() -> Self {
        Self {
            total_km_year: 7.3e8,
            n_vehicles: 100_000,
            kwh_per_km_base: 0.2,
            temperature_factor: 1.0,
            driving_behaviour_factor: 1.0,
            range_anxiety_factor: 1.0,
            drivetrain_factor: 1.0,
            allow_extreme_factors: false,
        }
    }
}

impl EnergyAssumptions {
    pub fn validate(&self) -> Result<()> {
        let p = |f: &str| format!("estimator.assumptions.{f}");
        if !(self.total_km_year.is_finite() && self.total_km_year >= 0.0) {
            return Err(Error::config(p("total_km_year"), "must be >= 0"));
        }
        if self.n_vehicles == 0 {
            return Err(Error::config(p("n_vehicles"), "must be > 0"));
        }
        if !(self.kwh_per_km_base > 0.0) {
            return Err(Error::config(p("kwh_per_km_base"), "must be > 0"));
        }
        for (name, v) in self.factors() {
            let ok = if self.allow_extreme_factors {
                v.is_finite() && v > 0.0
            } else {
                v > 0.5 && v < 2.0
            };
            if !ok {
                return Err(Error::config(p(name), format!("{v} outside the accepted range")));
            }
        }
        Ok(())
    }

    fn factors(&self) -> [(&'static str, f64); 4] {
        [
            ("temperature_factor", self.temperature_factor),
            ("driving_behaviour_factor", self.driving_behaviour_factor),
            ("range_anxiety_factor", self.range_anxiety_factor),
            ("drivetrain_factor", self.drivetrain_factor),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub assumptions: EnergyAssumptions,
    /// Weight of home-side need against destination-side need.
    pub alpha: f64,
    /// Share of the day a public connector delivers at full power.
    pub utilization: f64,
    pub hours_per_day: f64,
    /// Replaces the computed per-EV daily need, kWh/day.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_ev_kwh_day: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            assumptions: EnergyAssumptions::default(),
            alpha: 0.5,
            utilization: 0.2,
            hours_per_day: 24.0,
            per_ev_kwh_day: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.assumptions.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("estimator.alpha", "must be in [0, 1]"));
        }
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return Err(Error::config("estimator.utilization", "must be in (0, 1]"));
        }
        if !(self.hours_per_day > 0.0 && self.hours_per_day <= 24.0) {
            return Err(Error::config("estimator.hours_per_day", "must be in (0, 24]"));
        }
        if let Some(v) = self.per_ev_kwh_day {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config("estimator.per_ev_kwh_day", "must be >= 0"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// kWh per EV per day: yearly distance per vehicle times adjusted consumption,
/// spread over 365 days.
pub fn avg_daily_energy_per_ev(a: &EnergyAssumptions) -> Result<f64> {
    if a.n_vehicles == 0 {
        return Err(Error::arg("n_vehicles must be > 0"));
    }
    let factor: f64 = a.factors().iter().map(|(_, v)| v).product();
    Ok(a.total_km_year / a.n_vehicles as f64 * a.kwh_per_km_base * factor / 365.0)
}

pub fn fleet_daily_need(per_ev: f64, boroughs: &[Borough]) -> f64 {
    per_ev * boroughs.iter().map(|b| b.ev_count as f64).sum::<f64>()
}

fn normalise(pairs: impl Iterator<Item = (String, f64)>) -> BoroughMap {
    let map: BoroughMap = pairs.collect();
    let total: f64 = map.values().sum();
    map.into_iter().map(|(k, v)| (k, v / total)).collect()
}

/// Share of the region's EVs registered in each borough.
pub fn home_weights(boroughs: &[Borough]) -> Result<BoroughMap> {
    if boroughs.iter().map(|b| b.ev_count).sum::<u64>() == 0 {
        return Err(Error::Degenerate("total EV count is zero".into()));
    }
    Ok(normalise(boroughs.iter().map(|b| (b.id.clone(), b.ev_count as f64))))
}

/// Share of points of interest, each weighted by its borough's `poi_weight`.
/// All-zero counts give uniform weights.
pub fn destination_weights(boroughs: &[Borough]) -> BoroughMap {
    let raw = |b: &Borough| b.poi_count as f64 * b.poi_weight;
    if boroughs.iter().map(raw).sum::<f64>() <= 0.0 {
        let n = boroughs.len() as f64;
        return boroughs.iter().map(|b| (b.id.clone(), 1.0 / n)).collect();
    }
    normalise(boroughs.iter().map(|b| (b.id.clone(), raw(b))))
}

fn same_keys(a: &BoroughMap, b: &BoroughMap) -> Result<()> {
    if a.keys().ne(b.keys()) {
        return Err(Error::arg("borough sets differ"));
    }
    Ok(())
}

pub fn combined_need_distribution(
    home_w: &BoroughMap,
    dest_w: &BoroughMap,
    alpha: f64,
    fleet_need: f64,
) -> Result<BoroughMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg("alpha must be in [0, 1]"));
    }
    same_keys(home_w, dest_w)?;
    Ok(home_w
        .iter()
        .map(|(k, h)| (k.clone(), fleet_need * (alpha * h + (1.0 - alpha) * dest_w[k])))
        .collect())
}

/// Energy per day the working connectors of each borough can deliver.
/// Boroughs of `region` without stations appear with zero.
pub fn borough_supply_capacity(
    network: &Network,
    region: &Region,
    utilization: f64,
    hours_per_day: f64,
) -> Result<BoroughMap> {
    if !(utilization > 0.0 && utilization <= 1.0) {
        return Err(Error::arg("utilization must be in (0, 1]"));
    }
    if !(hours_per_day > 0.0 && hours_per_day <= 24.0) {
        return Err(Error::arg("hours_per_day must be in (0, 24]"));
    }
    let mut out: BoroughMap = region.boroughs().iter().map(|b| (b.id.clone(), 0.0)).collect();
    for st in network.stations() {
        let kw: f64 = st
            .connectors
            .iter()
            .filter(|c| c.state != ConnectorState::OutOfService)
            .map(|c| c.socket.power)
            .sum();
        *out.entry(st.location.borough_id.clone()).or_insert(0.0) += kw * hours_per_day * utilization;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satisfaction {
    pub per_borough: BoroughMap,
    /// Satisfied share of the regional need.
    pub aggregate: f64,
    /// kWh/day of need the capacity covers.
    pub satisfied_kwh_day: f64,
}

pub fn degree_of_satisfaction(need: &BoroughMap, capacity: &BoroughMap) -> Result<Satisfaction> {
    same_keys(need, capacity)?;
    let per_borough = need
        .iter()
        .map(|(k, &n)| {
            let c = capacity[k];
            (k.clone(), if n <= 0.0 { 1.0 } else { (c / n).min(1.0) })
        })
        .collect();
    let total: f64 = need.values().sum();
    let satisfied: f64 = need.iter().map(|(k, &n)| n.min(capacity[k])).sum();
    Ok(Satisfaction {
        per_borough,
        aggregate: if total <= 0.0 { 1.0 } else { satisfied / total },
        satisfied_kwh_day: satisfied,
    })
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoroughStats {
    pub borough_id: String,
    pub name: String,
    pub zone: String,
    pub ev_count: u64,
    pub poi_count: u64,
    pub home_weight: f64,
    pub dest_weight: f64,
    pub need_kwh_day: f64,
    pub capacity_kwh_day: f64,
    pub dos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalAggregate {
    pub boroughs: usize,
    pub area_km2: f64,
    pub ev_count: u64,
    pub per_ev_kwh_day: f64,
    pub fleet_need_kwh_day: f64,
    pub capacity_kwh_day: f64,
    pub satisfied_kwh_day: f64,
    pub dos: f64,
    /// EVs whose daily need the satisfied energy covers.
    pub satisfied_ev_equivalent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub scenario: String,
    pub alpha: f64,
    pub utilization: f64,
    pub hours_per_day: f64,
    pub boroughs: Vec<BoroughStats>,
    pub aggregate: RegionalAggregate,
}

/// Runs the whole estimation chain.
pub fn estimate(name: &str, region: &Region, network: &Network, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    let per_ev = match cfg.per_ev_kwh_day {
        Some(v) => v,
        None => avg_daily_energy_per_ev(&cfg.assumptions)?,
    };
    let boroughs = region.boroughs();
    let fleet = fleet_daily_need(per_ev, boroughs);
    let home = home_weights(boroughs)?;
    let dest = destination_weights(boroughs);
    let need = combined_need_distribution(&home, &dest, cfg.alpha, fleet)?;
    let capacity = borough_supply_capacity(network, region, cfg.utilization, cfg.hours_per_day)?;
    let dos = degree_of_satisfaction(&need, &capacity)?;
    let stats = boroughs
        .iter()
        .map(|b| BoroughStats {
            borough_id: b.id.clone(),
            name: b.name.clone(),
            zone: b.zone.as_str().to_string(),
            ev_count: b.ev_count,
            poi_count: b.poi_count,
            home_weight: home[&b.id],
            dest_weight: dest[&b.id],
            need_kwh_day: need[&b.id],
            capacity_kwh_day: capacity[&b.id],
            dos: dos.per_borough[&b.id],
        })
        .collect();
    Ok(EstimateReport {
        scenario: name.to_string(),
        alpha: cfg.alpha,
        utilization: cfg.utilization,
        hours_per_day: cfg.hours_per_day,
        boroughs: stats,
        aggregate: RegionalAggregate {
            boroughs: boroughs.len(),
            area_km2: region.total_area(),
            ev_count: region.total_evs(),
            per_ev_kwh_day: per_ev,
            fleet_need_kwh_day: fleet,
            capacity_kwh_day: capacity.values().sum(),
            satisfied_kwh_day: dos.satisfied_kwh_day,
            dos: dos.aggregate,
            satisfied_ev_equivalent: if per_ev > 0.0 {
                dos.satisfied_kwh_day / per_ev
            } else {
                region.total_evs() as f64
            },
        },
    })
}
