//! Value types shared by every other module: behavioural distributions, vehicle
//! and trip profiles, charging behaviour, service preferences, sockets and
//! geography.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Identifier of a synthetic driver.
pub type AgentId = u32;

/// Simulation clock, in whole minutes since the start of the run.
pub type Minute = u32;

pub const MINUTES_PER_DAY: Minute = 1440;

/// Absolute tolerance on the sum of a distribution's probabilities.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// Default pedestrian speed used for walk-time computations.
pub const DEFAULT_WALK_SPEED_KMH: f64 = 5.0;

// ---------------------------------------------------------------------------
// Discrete distributions
// ---------------------------------------------------------------------------

/// A finite categorical distribution over text labels.
///
/// Construction does not validate; call [`validate_distribution`] (or
/// [`DiscreteDistribution::new`]) before sampling. The serialized form is a
/// `label = probability` table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    categories: Vec<(String, f64)>,
}

/// One broken invariant of a [`DiscreteDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    SumNotOne { sum: f64 },
    Negative { label: String, probability: f64 },
    NotFinite { label: String },
    DuplicateLabel { label: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "distribution has no categories"),
            Violation::SumNotOne { sum } => write!(f, "probabilities sum to {sum}, expected 1"),
            Violation::Negative { label, probability } => {
                write!(f, "negative probability {probability} for `{label}`")
            }
            Violation::NotFinite { label } => write!(f, "non-finite probability for `{label}`"),
            Violation::DuplicateLabel { label } => write!(f, "duplicate label `{label}`"),
        }
    }
}

pub type ValidationResult = std::result::Result<(), Vec<Violation>>;

impl DiscreteDistribution {
    /// Builds a distribution and validates it.
    pub fn new<S: Into<String>>(
        categories: impl IntoIterator<Item = (S, f64)>,
    ) -> std::result::Result<Self, Vec<Violation>> {
        let d = Self::from_pairs(categories);
        validate_distribution(&d)?;
        Ok(d)
    }

    /// Builds a distribution without checking invariants. Categories are
    /// kept in label order, the same order the serialized form uses.
    pub fn from_pairs<S: Into<String>>(categories: impl IntoIterator<Item = (S, f64)>) -> Self {
        let mut categories: Vec<(String, f64)> = categories.into_iter().map(|(l, p)| (l.into(), p)).collect();
        categories.sort_by(|a, b| a.0.cmp(&b.0));
        Self { categories }
    }

    /// All probability mass on one label.
    pub fn point(label: impl Into<String>) -> Self {
        Self::from_pairs([(label.into(), 1.0)])
    }

    pub fn categories(&self) -> &[(String, f64)] {
        &self.categories
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(l, _)| l.as_str())
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.categories.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }

    /// Draws one label. The distribution must be valid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (label, p) in &self.categories {
            if *p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(label);
            if u < acc {
                return label;
            }
        }
        // u landed in the rounding gap above the cumulative sum
        last.map(String::as_str).unwrap_or("")
    }

    /// Splits every label as a numeric bin (see [`parse_bin`]).
    pub fn numeric_bins(&self) -> Result<Vec<((f64, f64), f64)>> {
        self.categories
            .iter()
            .map(|(l, p)| {
                parse_bin(l)
                    .map(|b| (b, *p))
                    .ok_or_else(|| Error::arg(format!("label `{l}` is not a numeric bin")))
            })
            .collect()
    }
}

/// Checks the distribution invariants, returning every violation found.
pub fn validate_distribution(d: &DiscreteDistribution) -> ValidationResult {
    let mut violations = Vec::new();
    if d.categories.is_empty() {
        violations.push(Violation::Empty);
        return Err(violations);
    }
    let mut seen = BTreeSet::new();
    let mut sum = 0.0;
    for (label, p) in &d.categories {
        if !seen.insert(label.as_str()) {
            violations.push(Violation::DuplicateLabel { label: label.clone() });
        }
        if !p.is_finite() {
            violations.push(Violation::NotFinite { label: label.clone() });
            continue;
        }
        if *p < 0.0 {
            violations.push(Violation::Negative {
                label: label.clone(),
                probability: *p,
            });
        }
        sum += p;
    }
    if sum.is_finite() && (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        violations.push(Violation::SumNotOne { sum });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

impl Serialize for DiscreteDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, f64> = self.categories.iter().map(|(l, p)| (l.as_str(), *p)).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        Ok(Self::from_pairs(map))
    }
}

/// Parses a bin label: `"7"` is the point bin 7..=7, `"2-3"` the closed range.
pub fn parse_bin(label: &str) -> Option<(f64, f64)> {
    let label = label.trim();
    match label.split_once('-') {
        Some((lo, hi)) => {
            let lo: f64 = lo.trim().parse().ok()?;
            let hi: f64 = hi.trim().parse().ok()?;
            (lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0).then_some((lo, hi))
        }
        None => {
            let v: f64 = label.parse().ok()?;
            (v.is_finite() && v >= 0.0).then_some((v, v))
        }
    }
}

// ---------------------------------------------------------------------------
// Sockets
// ---------------------------------------------------------------------------

/// Charging-rate class. Ordered by power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Slow,
    Fast,
    Rapid,
    SuperFast,
}

impl RateClass {
    /// Band boundaries: Slow <= 3.6 kW < Fast <= 22 kW < Rapid <= 50 kW < SuperFast.
    pub fn from_power(kw: f64) -> RateClass {
        if kw <= 3.6 {
            RateClass::Slow
        } else if kw <= 22.0 {
            RateClass::Fast
        } else if kw <= 50.0 {
            RateClass::Rapid
        } else {
            RateClass::SuperFast
        }
    }

    /// Representative power of the class, used when a charge is time-bounded
    /// and no connector has been chosen yet.
    pub fn nominal_power(self) -> f64 {
        match self {
            RateClass::Slow => 3.6,
            RateClass::Fast => 7.0,
            RateClass::Rapid => 50.0,
            RateClass::SuperFast => 150.0,
        }
    }

    pub fn parse(s: &str) -> Option<RateClass> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "slow" => Some(RateClass::Slow),
            "fast" => Some(RateClass::Fast),
            "rapid" => Some(RateClass::Rapid),
            "super_fast" | "superfast" => Some(RateClass::SuperFast),
            _ => None,
        }
    }
}

/// A socket standard offered at a given power, e.g. `Type2` at 7 kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocketType {
    pub id: String,
    pub rate_class: RateClass,
    pub power: f64,
}

impl SocketType {
    pub fn new(id: impl Into<String>, power: f64) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::arg("socket id is empty"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::arg(format!("socket {id}: power must be > 0 kW")));
        }
        Ok(Self {
            rate_class: RateClass::from_power(power),
            id,
            power,
        })
    }

    /// Parses the `socket:kW` notation used in station files.
    pub fn parse(spec: &str) -> Result<Self> {
        let (id, kw) = spec
            .split_once(':')
            .ok_or_else(|| Error::arg(format!("socket `{spec}` is not `id:kW`")))?;
        let kw: f64 = kw
            .trim()
            .parse()
            .map_err(|_| Error::arg(format!("socket `{spec}`: bad power")))?;
        Self::new(id.trim(), kw)
    }
}

impl fmt::Display for SocketType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.id, self.power)
    }
}

// ---------------------------------------------------------------------------
// Demand-side profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ownership {
    Owned,
    Shared,
    Rented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleProfile {
    pub make_id: String,
    /// kWh
    pub battery_capacity: f64,
    /// Socket ids the vehicle can plug into.
    pub socket_types: BTreeSet<String>,
    /// kWh per km
    pub consumption: f64,
    pub ownership: Ownership,
    #[serde(default)]
    pub v2g_capable: bool,
}

impl VehicleProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.battery_capacity.is_finite() && self.battery_capacity > 0.0) {
            return Err(Error::arg(format!(
                "vehicle {}: battery capacity must be > 0",
                self.make_id
            )));
        }
        if self.socket_types.is_empty() {
            return Err(Error::arg(format!("vehicle {}: no socket types", self.make_id)));
        }
        if !(self.consumption > 0.0 && self.consumption <= 1.0) {
            return Err(Error::arg(format!(
                "vehicle {}: consumption must be in (0, 1] kWh/km",
                self.make_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripPurpose {
    Commute,
    Shopping,
    SocialRecreational,
    Business,
    Other,
}

impl TripPurpose {
    pub const ALL: [TripPurpose; 5] = [
        TripPurpose::Commute,
        TripPurpose::Shopping,
        TripPurpose::SocialRecreational,
        TripPurpose::Business,
        TripPurpose::Other,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripProfile {
    pub purpose: TripPurpose,
    /// Trips per week, over count bins such as `"2-3"`.
    pub weekly_frequency: DiscreteDistribution,
    /// One-way trip duration, over minute bins such as `"30-60"`.
    pub trip_duration: DiscreteDistribution,
    /// km/h
    pub mean_speed: f64,
}

impl TripProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed > 1.0 && self.mean_speed <= 130.0) {
            return Err(Error::arg("mean_speed must be in (1, 130] km/h"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    FullCharge,
    TimePermits { max_minutes: f64 },
    TargetSoc { fraction: f64 },
}

impl StopCriterion {
    /// Parses `full`, `time_permits` / `time_permits:90`, or `target:0.8`.
    pub fn parse(label: &str, default_time_permits: f64) -> Option<StopCriterion> {
        let label = label.trim();
        let (head, arg) = match label.split_once(':') {
            Some((h, a)) => (h, Some(a.trim())),
            None => (label, None),
        };
        match (head, arg) {
            ("full", None) => Some(StopCriterion::FullCharge),
            ("time_permits", None) => Some(StopCriterion::TimePermits {
                max_minutes: default_time_permits,
            }),
            ("time_permits", Some(a)) => a
                .parse()
                .ok()
                .filter(|m: &f64| *m > 0.0)
                .map(|max_minutes| StopCriterion::TimePermits { max_minutes }),
            ("target", Some(a)) => a
                .parse()
                .ok()
                .filter(|f: &f64| *f > 0.0 && *f <= 1.0)
                .map(|fraction| StopCriterion::TargetSoc { fraction }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargePeriod {
    Night,
    Morning,
    Afternoon,
    Evening,
    NoUsualTime,
}

impl ChargePeriod {
    pub fn parse(s: &str) -> Option<ChargePeriod> {
        match s.trim() {
            "night" => Some(ChargePeriod::Night),
            "morning" => Some(ChargePeriod::Morning),
            "afternoon" => Some(ChargePeriod::Afternoon),
            "evening" => Some(ChargePeriod::Evening),
            "no_usual_time" => Some(ChargePeriod::NoUsualTime),
            _ => None,
        }
    }

    /// Minute-of-day window `[start, end)` during which planned charges begin.
    pub fn window(self) -> (Minute, Minute) {
        match self {
            ChargePeriod::Night => (22 * 60, 24 * 60),
            ChargePeriod::Morning => (6 * 60, 12 * 60),
            ChargePeriod::Afternoon => (12 * 60, 17 * 60),
            ChargePeriod::Evening => (17 * 60, 22 * 60),
            ChargePeriod::NoUsualTime => (6 * 60, 22 * 60),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeBehaviour {
    /// The agent looks for a charge once SOC drops strictly below this.
    pub start_threshold: f64,
    pub stop_criterion: StopCriterion,
    pub preferred_period: ChargePeriod,
    /// Planned charges per week, over count bins.
    pub weekly_charge_frequency: DiscreteDistribution,
    /// Minimum charging-rate class requested at public stations.
    pub rate_class: RateClass,
}

impl ChargeBehaviour {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.start_threshold) {
            return Err(Error::arg("start_threshold must be in [0, 1)"));
        }
        if let StopCriterion::TargetSoc { fraction } = self.stop_criterion {
            if fraction <= self.start_threshold {
                return Err(Error::arg("target SOC must exceed start_threshold"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferBudget {
    AnyTime,
    FewPerMonth(u32),
    FewPerYear(u32),
}

impl OfferBudget {
    /// Parses `any_time`, `per_month:2`, `per_year:3`.
    pub fn parse(s: &str) -> Option<OfferBudget> {
        let s = s.trim();
        if s == "any_time" {
            return Some(OfferBudget::AnyTime);
        }
        let (head, n) = s.split_once(':')?;
        let n: u32 = n.trim().parse().ok()?;
        match head {
            "per_month" => Some(OfferBudget::FewPerMonth(n)),
            "per_year" => Some(OfferBudget::FewPerYear(n)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePreference {
    /// Operator ids the driver holds a subscription with.
    pub subscriptions: BTreeSet<String>,
    pub min_discount_to_deport: f64,
    pub max_extra_minutes: f64,
    pub max_walk_minutes: f64,
    pub offer_budget: OfferBudget,
    pub has_home_charger: bool,
    /// kW; zero without a home charger.
    pub home_charger_power: f64,
    /// Dequeued ahead of non-priority agents when queuing is enabled.
    #[serde(default)]
    pub wants_priority: bool,
}

impl ServicePreference {
    pub fn validate(&self) -> Result<()> {
        if self.max_extra_minutes < 0.0 {
            return Err(Error::arg("max_extra_minutes must be >= 0"));
        }
        if self.max_walk_minutes < 0.0 {
            return Err(Error::arg("max_walk_minutes must be >= 0"));
        }
        if !self.has_home_charger && self.home_charger_power != 0.0 {
            return Err(Error::arg("home_charger_power must be 0 without a home charger"));
        }
        if self.home_charger_power < 0.0 {
            return Err(Error::arg("home_charger_power must be >= 0"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Geography
// ---------------------------------------------------------------------------

/// A point in projected planar kilometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub borough_id: String,
}

impl Location {
    pub fn new(x: f64, y: f64, borough_id: impl Into<String>) -> Self {
        Self {
            x,
            y,
            borough_id: borough_id.into(),
        }
    }

    pub fn distance_km(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Inner,
    Outer,
    City,
}

impl Zone {
    pub fn parse(s: &str) -> Option<Zone> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inner" => Some(Zone::Inner),
            "outer" => Some(Zone::Outer),
            "city" => Some(Zone::City),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Inner => "inner",
            Zone::Outer => "outer",
            Zone::City => "city",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Borough {
    pub id: String,
    pub name: String,
    pub zone: Zone,
    pub ev_count: u64,
    pub poi_count: u64,
    /// km²
    pub area: f64,
    /// Planar centroid, when known. Agents are placed around it.
    pub centroid: Option<(f64, f64)>,
    /// Attractiveness of one point of interest in this borough (default 1).
    pub poi_weight: f64,
}

impl Borough {
    /// Radius of the disc with the borough's area.
    pub fn radius_km(&self) -> f64 {
        (self.area / std::f64::consts::PI).sqrt()
    }
}

/// The set of boroughs making up a study area.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    boroughs: Vec<Borough>,
    index: HashMap<String, usize>,
}

impl Region {
    pub fn new(boroughs: Vec<Borough>) -> Result<Self> {
        let mut index = HashMap::with_capacity(boroughs.len());
        for (i, b) in boroughs.iter().enumerate() {
            if index.insert(b.id.clone(), i).is_some() {
                return Err(Error::arg(format!("duplicate borough id `{}`", b.id)));
            }
            if !(b.area.is_finite() && b.area > 0.0) {
                return Err(Error::arg(format!("borough `{}`: area must be > 0", b.id)));
            }
            if !(b.poi_weight.is_finite() && b.poi_weight >= 0.0) {
                return Err(Error::arg(format!("borough `{}`: poi_weight must be >= 0", b.id)));
            }
        }
        Ok(Self { boroughs, index })
    }

    pub fn boroughs(&self) -> &[Borough] {
        &self.boroughs
    }

    pub fn get(&self, id: &str) -> Option<&Borough> {
        self.index.get(id).map(|&i| &self.boroughs[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn total_area(&self) -> f64 {
        self.boroughs.iter().map(|b| b.area).sum()
    }

    pub fn total_evs(&self) -> u64 {
        self.boroughs.iter().map(|b| b.ev_count).sum()
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// State of charge after adding `energy` kWh to a battery of `capacity` kWh.
pub fn soc_after_charge(soc: f64, capacity: f64, energy: f64) -> Result<f64> {
    if !(capacity > 0.0) {
        return Err(Error::arg("capacity must be > 0"));
    }
    if !(energy >= 0.0) {
        return Err(Error::arg("energy must be >= 0"));
    }
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::arg("soc must be in [0, 1]"));
    }
    Ok((soc + energy / capacity).min(1.0))
}

/// Walking time in minutes between two points.
pub fn walk_time(from: &Location, to: &Location, walk_speed_kmh: f64) -> Result<f64> {
    if !(walk_speed_kmh > 0.0) {
        return Err(Error::arg("walk speed must be > 0"));
    }
    Ok(from.distance_km(to) / walk_speed_kmh * 60.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn valid_symmetric_distribution() {
        let d = DiscreteDistribution::from_pairs([("a", 0.5), ("b", 0.5)]);
        assert_eq!(validate_distribution(&d), Ok(()));
    }

    #[test]
    fn sum_violation_reported() {
        let d = DiscreteDistribution::from_pairs([("a", 0.6), ("b", 0.5)]);
        let v = validate_distribution(&d).unwrap_err();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::SumNotOne { sum } => assert!((sum - 1.1).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_violation_reported() {
        let d = DiscreteDistribution::from_pairs([("a", -0.1), ("b", 1.1)]);
        let v = validate_distribution(&d).unwrap_err();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::Negative { label, .. } if label == "a")));
    }

    #[test]
    fn duplicate_and_empty_reported() {
        let d = DiscreteDistribution::from_pairs([("a", 0.5), ("a", 0.5)]);
        assert!(validate_distribution(&d)
            .unwrap_err()
            .contains(&Violation::DuplicateLabel { label: "a".into() }));
        let e = DiscreteDistribution::from_pairs(Vec::<(String, f64)>::new());
        assert_eq!(validate_distribution(&e), Err(vec![Violation::Empty]));
    }

    #[test]
    fn sample_frequencies_within_four_standard_errors() {
        let d = DiscreteDistribution::new([("x", 0.1), ("y", 0.25), ("z", 0.65)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(d.sample(&mut rng).to_string()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 3);
        for (label, p) in d.categories() {
            let freq = counts[label] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "{label}: {freq} vs {p}");
        }
    }

    #[test]
    fn zero_probability_label_never_sampled() {
        let d = DiscreteDistribution::new([("never", 0.0), ("always", 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), "always");
        }
    }

    #[test]
    fn bins_parse() {
        assert_eq!(parse_bin("7"), Some((7.0, 7.0)));
        assert_eq!(parse_bin("2-3"), Some((2.0, 3.0)));
        assert_eq!(parse_bin("30-60"), Some((30.0, 60.0)));
        assert_eq!(parse_bin("3-2"), None);
        assert_eq!(parse_bin("daily"), None);
    }

    #[test]
    fn soc_examples() {
        assert_eq!(soc_after_charge(0.5, 40.0, 10.0).unwrap(), 0.75);
        assert_eq!(soc_after_charge(0.9, 40.0, 10.0).unwrap(), 1.0);
        assert_eq!(soc_after_charge(0.3, 40.0, 0.0).unwrap(), 0.3);
        assert!(soc_after_charge(0.3, 40.0, -1.0).is_err());
        assert!(soc_after_charge(0.3, 0.0, 1.0).is_err());
    }

    #[test]
    fn walk_examples() {
        let a = Location::new(0.0, 0.0, "A");
        assert_eq!(walk_time(&a, &a, 5.0).unwrap(), 0.0);
        let b = Location::new(1.0, 0.0, "A");
        assert!((walk_time(&a, &b, 5.0).unwrap() - 12.0).abs() < 1e-12);
        let c = Location::new(0.75, 1.0, "A"); // 1.25 km away
        assert!((walk_time(&a, &c, 5.0).unwrap() - 15.0).abs() < 1e-12);
        assert!(walk_time(&a, &b, 0.0).is_err());
    }

    #[test]
    fn rate_class_bands() {
        assert_eq!(RateClass::from_power(3.6), RateClass::Slow);
        assert_eq!(RateClass::from_power(7.0), RateClass::Fast);
        assert_eq!(RateClass::from_power(22.0), RateClass::Fast);
        assert_eq!(RateClass::from_power(50.0), RateClass::Rapid);
        assert_eq!(RateClass::from_power(150.0), RateClass::SuperFast);
        assert!(RateClass::Slow < RateClass::Fast && RateClass::Rapid < RateClass::SuperFast);
        assert_eq!(SocketType::parse("Type2:7").unwrap().rate_class, RateClass::Fast);
        assert!(SocketType::parse("Type2").is_err());
    }

    #[test]
    fn behaviour_labels_parse() {
        assert_eq!(StopCriterion::parse("full", 60.0), Some(StopCriterion::FullCharge));
        assert_eq!(
            StopCriterion::parse("time_permits", 45.0),
            Some(StopCriterion::TimePermits { max_minutes: 45.0 })
        );
        assert_eq!(
            StopCriterion::parse("target:0.8", 45.0),
            Some(StopCriterion::TargetSoc { fraction: 0.8 })
        );
        assert_eq!(OfferBudget::parse("per_month:2"), Some(OfferBudget::FewPerMonth(2)));
        assert_eq!(OfferBudget::parse("any_time"), Some(OfferBudget::AnyTime));
        assert_eq!(OfferBudget::parse("weekly"), None);
    }

    proptest! {
        #[test]
        fn soc_bounded_and_monotone(soc in 0.0f64..=1.0, cap in 1.0f64..200.0, e1 in 0.0f64..100.0, e2 in 0.0f64..100.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = soc_after_charge(soc, cap, lo).unwrap();
            let b = soc_after_charge(soc, cap, hi).unwrap();
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(a <= b);
        }

        #[test]
        fn walk_symmetric_and_scales(x1 in -50.0f64..50.0, y1 in -50.0f64..50.0, x2 in -50.0f64..50.0, y2 in -50.0f64..50.0, s in 0.5f64..10.0, k in 1u32..8) {
            let a = Location::new(x1, y1, "A");
            let b = Location::new(x2, y2, "B");
            let ab = walk_time(&a, &b, s).unwrap();
            prop_assert_eq!(ab, walk_time(&b, &a, s).unwrap());
            prop_assert!(ab >= 0.0);
            // power-of-two factors keep the rescaling exact in floating point
            let k = f64::from(1u32 << k);
            let scaled = walk_time(&a, &b, s * k).unwrap();
            prop_assert_eq!(scaled, ab / k);
        }
    }
}
