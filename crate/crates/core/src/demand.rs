//! Synthetic drivers and the charging requests they emit.
//!
//! A population is sampled attribute by attribute from the behavioural
//! distributions of the scenario. Request generation then walks every agent
//! through the horizon day by day: trips drain the battery, planned charges
//! happen on the agent's weekly charge days, and a request is emitted whenever
//! the state of charge drops below the agent's start threshold. Agents with a
//! home charger serve planned charges at home; those who charge at night also
//! defer threshold charges to the night.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    parse_bin, AgentId, ChargeBehaviour, ChargePeriod, DiscreteDistribution, Location, Minute, OfferBudget, Ownership,
    RateClass, Region, ServicePreference, StopCriterion, TripProfile, TripPurpose, VehicleProfile, MINUTES_PER_DAY,
};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::supply::Network;

/// Requests below this energy are not emitted.
const MIN_REQUEST_KWH: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Length of a home charging session, hours.
    pub home_window_hours: f64,
    /// Bound applied to the "as much as time permits" stop criterion, minutes.
    pub time_permits_minutes: f64,
    pub distributions: BehaviourDistributions,
    pub vehicles: Vec<VehicleSpec>,
    pub trips: Vec<TripSpec>,
}

/// One distribution per sampled agent attribute. Labels are parsed per field;
/// see the reference scenario for the accepted notation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviourDistributions {
    pub ownership: DiscreteDistribution,
    pub make: DiscreteDistribution,
    pub home_charger: DiscreteDistribution,
    pub home_charger_power_kw: DiscreteDistribution,
    pub start_threshold: DiscreteDistribution,
    pub stop_criterion: DiscreteDistribution,
    pub preferred_period: DiscreteDistribution,
    pub weekly_charge_frequency: DiscreteDistribution,
    pub rate_class: DiscreteDistribution,
    pub subscription_count: DiscreteDistribution,
    pub operator: DiscreteDistribution,
    pub min_discount: DiscreteDistribution,
    pub max_extra_minutes: DiscreteDistribution,
    pub max_walk_minutes: DiscreteDistribution,
    pub offer_budget: DiscreteDistribution,
    pub priority: DiscreteDistribution,
    pub initial_soc: DiscreteDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub make_id: String,
    pub battery_kwh: f64,
    pub sockets: Vec<String>,
    pub consumption_kwh_per_km: f64,
    #[serde(default)]
    pub v2g: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripSpec {
    pub purpose: TripPurpose,
    pub mean_speed_kmh: f64,
    pub weekly_frequency: DiscreteDistribution,
    pub duration_minutes: DiscreteDistribution,
}

fn dist<const N: usize>(pairs: [(&str, f64); N]) -> DiscreteDistribution {
    DiscreteDistribution::from_pairs(pairs)
}

impl Default for BehaviourDistributions {
    fn default() -> Self {
        Self {
            ownership: dist([("owned", 0.82), ("shared", 0.10), ("rented", 0.08)]),
            make: dist([
                ("nissan_leaf", 0.25),
                ("tesla_model_3", 0.20),
                ("bmw_i3", 0.15),
                ("renault_zoe", 0.15),
                ("hyundai_ioniq", 0.15),
                ("mitsubishi_outlander_phev", 0.10),
            ]),
            home_charger: dist([("yes", 0.90), ("no", 0.10)]),
            home_charger_power_kw: dist([("7", 0.65), ("3.6", 0.25), ("22", 0.10)]),
            start_threshold: dist([("0.1", 0.10), ("0.25", 0.38), ("0.5", 0.30), ("0.75", 0.22)]),
            stop_criterion: dist([("full", 0.55), ("time_permits", 0.30), ("target:0.8", 0.15)]),
            preferred_period: dist([
                ("night", 0.48),
                ("no_usual_time", 0.22),
                ("evening", 0.14),
                ("morning", 0.08),
                ("afternoon", 0.08),
            ]),
            weekly_charge_frequency: dist([("7", 0.22), ("4-6", 0.16), ("2-3", 0.30), ("1", 0.22), ("0", 0.10)]),
            rate_class: dist([("slow", 0.05), ("fast", 0.60), ("rapid", 0.30), ("super_fast", 0.05)]),
            subscription_count: dist([("0", 0.15), ("1", 0.45), ("2", 0.30), ("3", 0.10)]),
            operator: dist([
                ("op1", 0.25),
                ("op2", 0.20),
                ("op3", 0.20),
                ("op4", 0.15),
                ("op5", 0.10),
                ("op6", 0.10),
            ]),
            min_discount: DiscreteDistribution::point("0.25"),
            max_extra_minutes: DiscreteDistribution::point("10"),
            max_walk_minutes: DiscreteDistribution::point("15"),
            offer_budget: dist([
                ("any_time", 0.35),
                ("per_month:2", 0.20),
                ("per_year:3", 0.30),
                ("per_year:0", 0.15),
            ]),
            priority: dist([("yes", 0.37), ("no", 0.63)]),
            initial_soc: DiscreteDistribution::point("0.5-1.0"),
        }
    }
}

impl Default for DemandConfig {
    fn default() -> Self {
        let vehicle = |make: &str, kwh: f64, sockets: &[&str], cons: f64, v2g: bool| VehicleSpec {
            make_id: make.into(),
            battery_kwh: kwh,
            sockets: sockets.iter().map(|s| s.to_string()).collect(),
            consumption_kwh_per_km: cons,
            v2g,
        };
        let trip = |purpose, freq: DiscreteDistribution, dur: DiscreteDistribution| TripSpec {
            purpose,
            mean_speed_kmh: 25.0,
            weekly_frequency: freq,
            duration_minutes: dur,
        };
        Self {
            home_window_hours: 8.0,
            time_permits_minutes: 60.0,
            distributions: BehaviourDistributions::default(),
            vehicles: vec![
                vehicle("nissan_leaf", 40.0, &["Type2", "CHAdeMO"], 0.17, true),
                vehicle("tesla_model_3", 55.0, &["Type2", "CCS"], 0.15, false),
                vehicle("bmw_i3", 42.0, &["Type2", "CCS"], 0.16, false),
                vehicle("renault_zoe", 52.0, &["Type2"], 0.17, false),
                vehicle("hyundai_ioniq", 38.0, &["Type2", "CCS"], 0.14, false),
                vehicle("mitsubishi_outlander_phev", 13.8, &["Type1", "CHAdeMO"], 0.20, true),
            ],
            trips: vec![
                trip(
                    TripPurpose::Commute,
                    dist([("0", 0.45), ("1-2", 0.15), ("3-5", 0.30), ("6-10", 0.10)]),
                    dist([("5-30", 0.35), ("30-60", 0.45), ("60-120", 0.20)]),
                ),
                trip(
                    TripPurpose::Shopping,
                    dist([("0", 0.10), ("1-2", 0.50), ("3-5", 0.35), ("6-10", 0.05)]),
                    dist([("5-30", 0.55), ("30-60", 0.35), ("60-120", 0.10)]),
                ),
                trip(
                    TripPurpose::SocialRecreational,
                    dist([("0", 0.10), ("1-2", 0.45), ("3-5", 0.35), ("6-10", 0.10)]),
                    dist([("5-30", 0.30), ("30-60", 0.45), ("60-120", 0.20), ("120-240", 0.05)]),
                ),
                trip(
                    TripPurpose::Business,
                    dist([("0", 0.70), ("1-2", 0.20), ("3-5", 0.10)]),
                    dist([("5-30", 0.30), ("30-60", 0.40), ("60-120", 0.30)]),
                ),
                trip(
                    TripPurpose::Other,
                    dist([("0", 0.60), ("1-2", 0.35), ("3-5", 0.05)]),
                    dist([("5-30", 0.50), ("30-60", 0.40), ("60-120", 0.10)]),
                ),
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// Agents, requests, offers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: AgentId,
    pub vehicle: VehicleProfile,
    pub trips: Vec<TripProfile>,
    pub behaviour: ChargeBehaviour,
    pub preference: ServicePreference,
    pub home: Location,
    pub soc: f64,
    pub offers_accepted_this_period: u32,
    /// Index of the calendar period (month or year of simulated time) the
    /// acceptance counter refers to.
    pub offer_period: u32,
}

impl Agent {
    /// Resets the offer counter when `now` falls in a new budget period.
    /// Months are 30 simulated days, years 365.
    pub fn roll_offer_period(&mut self, now: Minute) {
        let day = now / MINUTES_PER_DAY;
        let period = match self.preference.offer_budget {
            OfferBudget::AnyTime => 0,
            OfferBudget::FewPerMonth(_) => day / 30,
            OfferBudget::FewPerYear(_) => day / 365,
        };
        if period != self.offer_period {
            self.offer_period = period;
            self.offers_accepted_this_period = 0;
        }
    }

    fn budget_left(&self) -> bool {
        match self.preference.offer_budget {
            OfferBudget::AnyTime => true,
            OfferBudget::FewPerMonth(n) | OfferBudget::FewPerYear(n) => self.offers_accepted_this_period < n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    /// A charge on one of the agent's weekly charge days.
    Planned,
    /// The state of charge fell below the start threshold after a trip.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeRequest {
    pub agent_id: AgentId,
    pub time: Minute,
    pub destination: Location,
    /// kWh
    pub energy_needed: f64,
    pub rate_class_wanted: RateClass,
    /// minutes
    pub max_walk: f64,
    pub subscriptions: BTreeSet<String>,
    /// Socket ids of the requesting vehicle.
    pub sockets: BTreeSet<String>,
    /// State of charge when the request was emitted.
    pub soc: f64,
    pub kind: RequestKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferKind {
    DeportInTime,
    DeportInSpace,
}

/// A tariff discount in exchange for charging later or further away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub kind: OfferKind,
    pub discount: f64,
    pub extra_minutes: f64,
}

pub fn needs_charge(agent: &Agent) -> bool {
    agent.soc < agent.behaviour.start_threshold
}

/// Decides an agent's response to a deporting offer; acceptance consumes one
/// unit of the agent's offer budget.
pub fn accept_offer(agent: &mut Agent, offer: &Offer) -> bool {
    let ok = offer.discount >= agent.preference.min_discount_to_deport
        && offer.extra_minutes <= agent.preference.max_extra_minutes
        && agent.budget_left();
    if ok {
        agent.offers_accepted_this_period += 1;
    }
    ok
}

// ---------------------------------------------------------------------------
// Typed sampling
// ---------------------------------------------------------------------------

/// A validated distribution whose labels have been parsed into values.
#[derive(Debug, Clone)]
pub(crate) struct Typed<T> {
    dist: DiscreteDistribution,
    values: Vec<T>,
}

impl<T: Clone> Typed<T> {
    pub(crate) fn parse(path: &str, dist: &DiscreteDistribution, parse: impl Fn(&str) -> Option<T>) -> Result<Self> {
        crate::domain::validate_distribution(dist).map_err(|v| {
            let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            Error::config(path, msg)
        })?;
        let values = dist
            .labels()
            .map(|l| parse(l).ok_or_else(|| Error::config(path, format!("unrecognised label `{l}`"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dist: dist.clone(),
            values,
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let label = self.dist.sample(rng);
        let i = self
            .dist
            .labels()
            .position(|l| l == label)
            .expect("sampled label belongs to the distribution");
        self.values[i].clone()
    }
}

fn parse_yes_no(s: &str) -> Option<bool> {
    match s.trim() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    s.trim().parse().ok().filter(|v: &f64| (0.0..=1.0).contains(v))
}

fn parse_nonneg(s: &str) -> Option<f64> {
    s.trim().parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0)
}

fn parse_count_bin(s: &str) -> Option<(u32, u32)> {
    let (lo, hi) = parse_bin(s)?;
    (lo.fract() == 0.0 && hi.fract() == 0.0).then_some((lo as u32, hi as u32))
}

fn parse_fraction_bin(s: &str) -> Option<(f64, f64)> {
    parse_bin(s).filter(|(_, hi)| *hi <= 1.0)
}

fn parse_ownership(s: &str) -> Option<Ownership> {
    match s.trim() {
        "owned" => Some(Ownership::Owned),
        "shared" => Some(Ownership::Shared),
        "rented" => Some(Ownership::Rented),
        _ => None,
    }
}

fn sample_count<R: Rng + ?Sized>(bins: &Typed<(u32, u32)>, rng: &mut R) -> u32 {
    let (lo, hi) = bins.sample(rng);
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

fn sample_in_bin<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

// ---------------------------------------------------------------------------
// Geography: where agents live and travel to
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Place {
    id: String,
    anchor: (f64, f64),
    radius: f64,
}

/// Spatial sampling frame derived from the region. Homes are drawn by
/// borough EV share, trip destinations by borough attractiveness.
#[derive(Debug, Clone)]
pub struct Geography {
    places: Vec<Place>,
    home: Option<Typed<usize>>,
    destination: Option<Typed<usize>>,
}

impl Geography {
    /// Borough anchors are the declared centroids, falling back to the mean
    /// position of the borough's stations, then to the origin.
    pub fn new(region: &Region, network: Option<&Network>) -> Result<Self> {
        let places: Vec<Place> = region
            .boroughs()
            .iter()
            .map(|b| {
                let anchor = b.centroid.unwrap_or_else(|| {
                    let pts: Vec<(f64, f64)> = network
                        .map(|n| {
                            n.stations()
                                .iter()
                                .filter(|s| s.location.borough_id == b.id)
                                .map(|s| (s.location.x, s.location.y))
                                .collect()
                        })
                        .unwrap_or_default();
                    if pts.is_empty() {
                        (0.0, 0.0)
                    } else {
                        let n = pts.len() as f64;
                        (
                            pts.iter().map(|p| p.0).sum::<f64>() / n,
                            pts.iter().map(|p| p.1).sum::<f64>() / n,
                        )
                    }
                });
                Place {
                    id: b.id.clone(),
                    anchor,
                    radius: b.radius_km(),
                }
            })
            .collect();
        let weights = |w: Vec<f64>| -> Result<Option<Typed<usize>>> {
            if w.is_empty() {
                return Ok(None);
            }
            let total: f64 = w.iter().sum();
            let n = w.len() as f64;
            let probs: Vec<(String, f64)> = w
                .iter()
                .enumerate()
                .map(|(i, x)| (i.to_string(), if total > 0.0 { x / total } else { 1.0 / n }))
                .collect();
            // normalised shares can miss 1 by an ulp or two; push the residue
            // into the largest category
            let mut probs = probs;
            let residue = 1.0 - probs.iter().map(|p| p.1).sum::<f64>();
            if let Some(max) = probs.iter_mut().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) {
                max.1 += residue;
            }
            let d = DiscreteDistribution::from_pairs(probs);
            Typed::parse("region", &d, |l| l.parse().ok()).map(Some)
        };
        let home = weights(region.boroughs().iter().map(|b| b.ev_count as f64).collect())?;
        let destination = weights(
            region
                .boroughs()
                .iter()
                .map(|b| b.poi_count as f64 * b.poi_weight)
                .collect(),
        )?;
        Ok(Self {
            places,
            home,
            destination,
        })
    }

    fn point<R: Rng + ?Sized>(&self, which: &Option<Typed<usize>>, rng: &mut R) -> Location {
        match which {
            None => Location::new(0.0, 0.0, ""),
            Some(t) => {
                let p = &self.places[t.sample(rng)];
                let r = p.radius * rng.gen::<f64>().sqrt();
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                Location::new(p.anchor.0 + r * theta.cos(), p.anchor.1 + r * theta.sin(), p.id.clone())
            }
        }
    }

    pub fn sample_home<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        self.point(&self.home, rng)
    }

    pub fn sample_destination<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        self.point(&self.destination, rng)
    }
}

// ---------------------------------------------------------------------------
// Seeded streams
// ---------------------------------------------------------------------------

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for one (seed, agent, purpose) triple.
pub(crate) fn stream(seed: u64, agent: AgentId, tag: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64((u64::from(agent) << 8) | tag));
    ChaCha8Rng::seed_from_u64(key)
}

pub(crate) const STREAM_POPULATION: u64 = 1;
pub(crate) const STREAM_REQUESTS: u64 = 2;

// ---------------------------------------------------------------------------
// Population
// ---------------------------------------------------------------------------

/// Parsed, validated form of [`DemandConfig`].
#[derive(Debug, Clone)]
pub struct PopulationSampler {
    ownership: Typed<Ownership>,
    make: Typed<usize>,
    vehicles: Vec<VehicleSpec>,
    home_charger: Typed<bool>,
    home_power: Typed<f64>,
    start_threshold: Typed<f64>,
    stop_criterion: Typed<StopCriterion>,
    preferred_period: Typed<ChargePeriod>,
    weekly_charge_frequency: DiscreteDistribution,
    rate_class: Typed<RateClass>,
    subscription_count: Typed<(u32, u32)>,
    operator: Typed<String>,
    min_discount: Typed<f64>,
    max_extra_minutes: Typed<f64>,
    max_walk_minutes: Typed<f64>,
    offer_budget: Typed<OfferBudget>,
    priority: Typed<bool>,
    initial_soc: Typed<(f64, f64)>,
    trips: Vec<TripProfile>,
}

impl PopulationSampler {
    pub fn new(cfg: &DemandConfig) -> Result<Self> {
        let p = |name: &str| format!("demand.distributions.{name}");
        let d = &cfg.distributions;
        if cfg.vehicles.is_empty() {
            return Err(Error::config("demand.vehicles", "vehicle catalogue is empty"));
        }
        for (i, v) in cfg.vehicles.iter().enumerate() {
            profile_from_spec(v, Ownership::Owned)
                .validate()
                .map_err(|e| Error::config(format!("demand.vehicles[{i}]"), e.to_string()))?;
        }
        let vehicles = cfg.vehicles.clone();
        let make = Typed::parse(&p("make"), &d.make, |l| vehicles.iter().position(|v| v.make_id == l))?;
        let time_permits = cfg.time_permits_minutes;
        if !(time_permits > 0.0) {
            return Err(Error::config("demand.time_permits_minutes", "must be > 0"));
        }
        if !(cfg.home_window_hours > 0.0 && cfg.home_window_hours <= 24.0) {
            return Err(Error::config("demand.home_window_hours", "must be in (0, 24]"));
        }
        let mut trips = Vec::with_capacity(cfg.trips.len());
        for (i, t) in cfg.trips.iter().enumerate() {
            let path = format!("demand.trips[{i}]");
            Typed::parse(
                &format!("{path}.weekly_frequency"),
                &t.weekly_frequency,
                parse_count_bin,
            )?;
            Typed::parse(&format!("{path}.duration_minutes"), &t.duration_minutes, parse_bin)?;
            let profile = TripProfile {
                purpose: t.purpose,
                weekly_frequency: t.weekly_frequency.clone(),
                trip_duration: t.duration_minutes.clone(),
                mean_speed: t.mean_speed_kmh,
            };
            profile
                .validate()
                .map_err(|e| Error::config(format!("{path}.mean_speed_kmh"), e.to_string()))?;
            trips.push(profile);
        }
        Typed::parse(
            &p("weekly_charge_frequency"),
            &d.weekly_charge_frequency,
            parse_count_bin,
        )?;
        let start_threshold = Typed::parse(&p("start_threshold"), &d.start_threshold, |s| {
            parse_fraction(s).filter(|v| *v < 1.0)
        })?;
        let stop_criterion = Typed::parse(&p("stop_criterion"), &d.stop_criterion, |s| {
            StopCriterion::parse(s, time_permits)
        })?;
        // a target SOC must lie above every threshold it can be paired with
        let max_threshold = start_threshold.values.iter().cloned().fold(0.0, f64::max);
        for v in &stop_criterion.values {
            if let StopCriterion::TargetSoc { fraction } = v {
                if *fraction <= max_threshold {
                    return Err(Error::config(
                        p("stop_criterion"),
                        format!("target {fraction} does not exceed start threshold {max_threshold}"),
                    ));
                }
            }
        }
        Ok(Self {
            ownership: Typed::parse(&p("ownership"), &d.ownership, parse_ownership)?,
            make,
            vehicles: cfg.vehicles.clone(),
            home_charger: Typed::parse(&p("home_charger"), &d.home_charger, parse_yes_no)?,
            home_power: Typed::parse(&p("home_charger_power_kw"), &d.home_charger_power_kw, |s| {
                parse_nonneg(s).filter(|v| *v > 0.0)
            })?,
            start_threshold,
            stop_criterion,
            preferred_period: Typed::parse(&p("preferred_period"), &d.preferred_period, ChargePeriod::parse)?,
            weekly_charge_frequency: d.weekly_charge_frequency.clone(),
            rate_class: Typed::parse(&p("rate_class"), &d.rate_class, RateClass::parse)?,
            subscription_count: Typed::parse(&p("subscription_count"), &d.subscription_count, parse_count_bin)?,
            operator: Typed::parse(&p("operator"), &d.operator, |s| Some(s.trim().to_string()))?,
            min_discount: Typed::parse(&p("min_discount"), &d.min_discount, parse_fraction)?,
            max_extra_minutes: Typed::parse(&p("max_extra_minutes"), &d.max_extra_minutes, parse_nonneg)?,
            max_walk_minutes: Typed::parse(&p("max_walk_minutes"), &d.max_walk_minutes, parse_nonneg)?,
            offer_budget: Typed::parse(&p("offer_budget"), &d.offer_budget, OfferBudget::parse)?,
            priority: Typed::parse(&p("priority"), &d.priority, parse_yes_no)?,
            initial_soc: Typed::parse(&p("initial_soc"), &d.initial_soc, parse_fraction_bin)?,
            trips,
        })
    }

    /// Samples agent `id`. Each agent has its own stream, so an agent does not
    /// depend on the population size.
    pub fn agent(&self, id: AgentId, seed: u64, geo: &Geography) -> Agent {
        let mut rng = stream(seed, id, STREAM_POPULATION);
        let ownership = self.ownership.sample(&mut rng);
        let spec = &self.vehicles[self.make.sample(&mut rng)];
        let vehicle = profile_from_spec(spec, ownership);
        let has_home_charger = self.home_charger.sample(&mut rng);
        let power = self.home_power.sample(&mut rng);
        let behaviour = ChargeBehaviour {
            start_threshold: self.start_threshold.sample(&mut rng),
            stop_criterion: self.stop_criterion.sample(&mut rng),
            preferred_period: self.preferred_period.sample(&mut rng),
            weekly_charge_frequency: self.weekly_charge_frequency.clone(),
            rate_class: self.rate_class.sample(&mut rng),
        };
        let n_subs = sample_count(&self.subscription_count, &mut rng);
        let mut subscriptions = BTreeSet::new();
        // bounded rejection sampling for distinct operators
        for _ in 0..(n_subs * 8) {
            if subscriptions.len() as u32 >= n_subs {
                break;
            }
            subscriptions.insert(self.operator.sample(&mut rng));
        }
        let preference = ServicePreference {
            subscriptions,
            min_discount_to_deport: self.min_discount.sample(&mut rng),
            max_extra_minutes: self.max_extra_minutes.sample(&mut rng),
            max_walk_minutes: self.max_walk_minutes.sample(&mut rng),
            offer_budget: self.offer_budget.sample(&mut rng),
            has_home_charger,
            home_charger_power: if has_home_charger { power } else { 0.0 },
            wants_priority: self.priority.sample(&mut rng),
        };
        let soc = sample_in_bin(self.initial_soc.sample(&mut rng), &mut rng);
        let home = geo.sample_home(&mut rng);
        Agent {
            id,
            vehicle,
            trips: self.trips.clone(),
            behaviour,
            preference,
            home,
            soc,
            offers_accepted_this_period: 0,
            offer_period: 0,
        }
    }
}

fn profile_from_spec(spec: &VehicleSpec, ownership: Ownership) -> VehicleProfile {
    VehicleProfile {
        make_id: spec.make_id.clone(),
        battery_capacity: spec.battery_kwh,
        socket_types: spec.sockets.iter().cloned().collect(),
        consumption: spec.consumption_kwh_per_km,
        ownership,
        v2g_capable: spec.v2g,
    }
}

/// Samples `scenario.population_size` agents.
pub fn build_population(scenario: &Scenario, seed: u64) -> Result<Vec<Agent>> {
    let sampler = PopulationSampler::new(&scenario.demand)?;
    if scenario.population_size == 0 {
        return Ok(Vec::new());
    }
    let region = scenario.region()?;
    let network = scenario.network(&region)?;
    let geo = Geography::new(&region, Some(&network))?;
    Ok((0..scenario.population_size)
        .map(|id| sampler.agent(id, seed, &geo))
        .collect())
}

// ---------------------------------------------------------------------------
// Request generation
// ---------------------------------------------------------------------------

/// Energy bookkeeping of one generation run, summed over agents (kWh).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DemandLedger {
    pub trip_energy: f64,
    pub home_energy: f64,
    pub requested_energy: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub home_sessions: u64,
    /// Trips cut short by an empty battery.
    pub stranded_trips: u64,
}

#[derive(Debug, Clone)]
struct TripPlan {
    depart: Minute,
    arrive: Minute,
    energy: f64,
    destination: Location,
}

#[derive(Debug, Clone)]
enum DayEvent {
    Arrive(usize),
    PlannedCharge(Minute),
}

/// Turns a population into a time-ordered request stream.
#[derive(Debug, Clone)]
pub struct RequestGenerator<'a> {
    pub geography: &'a Geography,
    pub home_window_hours: f64,
}

impl<'a> RequestGenerator<'a> {
    pub fn new(geography: &'a Geography, config: &DemandConfig) -> Self {
        Self {
            geography,
            home_window_hours: config.home_window_hours,
        }
    }

    pub fn generate(&self, population: &[Agent], horizon_days: u32, seed: u64) -> Vec<ChargeRequest> {
        self.generate_with_ledger(population, horizon_days, seed).0
    }

    pub fn generate_with_ledger(
        &self,
        population: &[Agent],
        horizon_days: u32,
        seed: u64,
    ) -> (Vec<ChargeRequest>, DemandLedger) {
        let mut ledger = DemandLedger::default();
        let mut requests = Vec::new();
        for agent in population {
            self.agent_requests(agent, horizon_days, seed, &mut requests, &mut ledger);
        }
        // stable: same-minute requests of one agent keep emission order
        requests.sort_by_key(|r| (r.time, r.agent_id));
        (requests, ledger)
    }

    fn plan_week(&self, agent: &Agent, rng: &mut ChaCha8Rng) -> (Vec<Vec<TripPlan>>, Vec<Option<Minute>>) {
        let mut days: Vec<Vec<TripPlan>> = vec![Vec::new(); 7];
        for profile in &agent.trips {
            let freq =
                Typed::parse("", &profile.weekly_frequency, parse_count_bin).expect("validated at population build");
            let dur = Typed::parse("", &profile.trip_duration, parse_bin).expect("validated at population build");
            let n = sample_count(&freq, rng);
            for _ in 0..n {
                let day = rng.gen_range(0..7usize);
                let depart: Minute = rng.gen_range(6 * 60..22 * 60);
                let minutes = sample_in_bin(dur.sample(rng), rng).round().max(1.0);
                let km = minutes / 60.0 * profile.mean_speed;
                let destination = self.geography.sample_destination(rng);
                days[day].push(TripPlan {
                    depart,
                    arrive: depart + minutes as Minute,
                    energy: km * agent.vehicle.consumption,
                    destination,
                });
            }
        }
        for trips in &mut days {
            trips.sort_by_key(|t| t.depart);
            let mut free_at = 0;
            for t in trips.iter_mut() {
                let duration = t.arrive - t.depart;
                t.depart = t.depart.max(free_at);
                t.arrive = t.depart + duration;
                free_at = t.arrive;
            }
        }
        let freq = Typed::parse("", &agent.behaviour.weekly_charge_frequency, parse_count_bin)
            .expect("validated at population build");
        let k = sample_count(&freq, rng).min(7) as usize;
        let mut charges = vec![None; 7];
        let (lo, hi) = agent.behaviour.preferred_period.window();
        for day in index::sample(rng, 7, k).into_iter() {
            charges[day] = Some(rng.gen_range(lo..hi));
        }
        (days, charges)
    }

    fn agent_requests(
        &self,
        agent: &Agent,
        horizon_days: u32,
        seed: u64,
        out: &mut Vec<ChargeRequest>,
        ledger: &mut DemandLedger,
    ) {
        let mut rng = stream(seed, agent.id, STREAM_REQUESTS);
        let cap = agent.vehicle.battery_capacity;
        let horizon_end = horizon_days * MINUTES_PER_DAY;
        let home_power = agent.preference.home_charger_power;
        let has_home = agent.preference.has_home_charger && home_power > 0.0;
        let night_home = has_home && agent.behaviour.preferred_period == ChargePeriod::Night;
        let mut soc = agent.soc;
        ledger.initial_energy += soc * cap;

        let mut week_plan = None;
        for day in 0..horizon_days {
            if day % 7 == 0 || week_plan.is_none() {
                week_plan = Some(self.plan_week(agent, &mut rng));
            }
            let (trips, charges) = week_plan.as_ref().unwrap();
            let trips = &trips[(day % 7) as usize];
            let day_start = day * MINUTES_PER_DAY;

            let mut events: Vec<(Minute, u8, DayEvent)> = trips
                .iter()
                .enumerate()
                .map(|(i, t)| (t.arrive, 0, DayEvent::Arrive(i)))
                .collect();
            if let Some(m) = charges[(day % 7) as usize] {
                events.push((m, 1, DayEvent::PlannedCharge(m)));
            }
            events.sort_by_key(|e| (e.0, e.1));

            let mut here = agent.home.clone();
            let mut deferred = false;
            for (_, _, ev) in events {
                match ev {
                    DayEvent::Arrive(i) => {
                        let t = &trips[i];
                        let used = t.energy.min(soc * cap);
                        if used < t.energy {
                            ledger.stranded_trips += 1;
                        }
                        ledger.trip_energy += used;
                        soc = (soc - used / cap).max(0.0);
                        here = t.destination.clone();
                        if soc < agent.behaviour.start_threshold {
                            if night_home {
                                deferred = true;
                            } else {
                                emit(
                                    agent,
                                    &mut soc,
                                    day_start + t.arrive,
                                    &here,
                                    RequestKind::Threshold,
                                    horizon_end,
                                    out,
                                    ledger,
                                );
                            }
                        }
                    }
                    DayEvent::PlannedCharge(minute) => {
                        if has_home {
                            self.home_charge(agent, &mut soc, ledger);
                            deferred = false;
                        } else {
                            let at_home = matches!(
                                agent.behaviour.preferred_period,
                                ChargePeriod::Night | ChargePeriod::Evening
                            );
                            let place = if at_home { agent.home.clone() } else { here.clone() };
                            emit(
                                agent,
                                &mut soc,
                                day_start + minute,
                                &place,
                                RequestKind::Planned,
                                horizon_end,
                                out,
                                ledger,
                            );
                        }
                    }
                }
            }
            if deferred {
                self.home_charge(agent, &mut soc, ledger);
            }
        }
        ledger.final_energy += soc * cap;
    }

    fn home_charge(&self, agent: &Agent, soc: &mut f64, ledger: &mut DemandLedger) {
        let cap = agent.vehicle.battery_capacity;
        let power = agent.preference.home_charger_power;
        let energy = stop_energy(agent.behaviour.stop_criterion, *soc, cap, power).min(power * self.home_window_hours);
        if energy > MIN_REQUEST_KWH {
            ledger.home_energy += energy;
            ledger.home_sessions += 1;
            *soc = (*soc + energy / cap).min(1.0);
        }
    }
}

/// Energy the stop criterion asks for, given the power it would charge at.
pub fn stop_energy(criterion: StopCriterion, soc: f64, capacity: f64, power: f64) -> f64 {
    let to_full = capacity * (1.0 - soc).max(0.0);
    match criterion {
        StopCriterion::FullCharge => to_full,
        StopCriterion::TargetSoc { fraction } => capacity * (fraction - soc).max(0.0),
        StopCriterion::TimePermits { max_minutes } => to_full.min(power * max_minutes / 60.0),
    }
}

#[allow(clippy::too_many_arguments)]
fn emit(
    agent: &Agent,
    soc: &mut f64,
    time: Minute,
    place: &Location,
    kind: RequestKind,
    horizon_end: Minute,
    out: &mut Vec<ChargeRequest>,
    ledger: &mut DemandLedger,
) {
    if time >= horizon_end {
        return;
    }
    let cap = agent.vehicle.battery_capacity;
    let rate = agent.behaviour.rate_class;
    let energy = stop_energy(agent.behaviour.stop_criterion, *soc, cap, rate.nominal_power());
    if energy <= MIN_REQUEST_KWH {
        return;
    }
    out.push(ChargeRequest {
        agent_id: agent.id,
        time,
        destination: place.clone(),
        energy_needed: energy,
        rate_class_wanted: rate,
        max_walk: agent.preference.max_walk_minutes,
        subscriptions: agent.preference.subscriptions.clone(),
        sockets: agent.vehicle.socket_types.clone(),
        soc: *soc,
        kind,
    });
    ledger.requested_energy += energy;
    // the stream assumes every request is served in full
    *soc = (*soc + energy / cap).min(1.0);
}

/// Generates the request stream of `population` over `horizon_days`.
pub fn generate_requests(
    scenario: &Scenario,
    population: &[Agent],
    horizon_days: u32,
    seed: u64,
) -> Result<Vec<ChargeRequest>> {
    if horizon_days < 1 {
        return Err(Error::arg("horizon must be at least one day"));
    }
    let region = scenario.region()?;
    let network = scenario.network(&region)?;
    let geo = Geography::new(&region, Some(&network))?;
    Ok(RequestGenerator::new(&geo, &scenario.demand).generate(population, horizon_days, seed))
}
