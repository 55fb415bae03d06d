//! Scenario documents: strict TOML parsing, validation, canonical writing and
//! content hashing.
//!
//! A scenario names its region and stations either inline or as CSV files
//! relative to the document. Parsing resolves file references and inlines
//! their rows, so a parsed scenario is self-contained and its canonical text
//! (and hash) covers the data it was built from.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demand::{DemandConfig, PopulationSampler};
use crate::domain::{Region, DEFAULT_WALK_SPEED_KMH};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::io::{read_boroughs_file, read_stations_file, region_from_records, BoroughRecord};
use crate::matching::{MatchParams, PolicyConfig};
use crate::scheduler::SchedulerConfig;
use crate::supply::{load_network, Network, StationRecord};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    /// Boroughs CSV, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boroughs_file: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boroughs: Vec<BoroughRecord>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationsSpec {
    /// Stations CSV, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, rename = "station", skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<StationRecord>,
}

fn default_name() -> String {
    "scenario".into()
}
fn default_horizon() -> u32 {
    7
}
fn default_seed() -> u64 {
    7
}
fn default_walk_speed() -> f64 {
    DEFAULT_WALK_SPEED_KMH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub population_size: u32,
    #[serde(default = "default_horizon")]
    pub horizon_days: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_walk_speed")]
    pub walk_speed_kmh: f64,
    pub region: RegionSpec,
    pub stations: StationsSpec,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

impl Scenario {
    /// An empty-region scenario with every default applied.
    pub fn minimal(population_size: u32) -> Self {
        Self {
            name: default_name(),
            population_size,
            horizon_days: default_horizon(),
            seed: default_seed(),
            walk_speed_kmh: default_walk_speed(),
            region: RegionSpec::default(),
            stations: StationsSpec::default(),
            demand: DemandConfig::default(),
            policy: PolicyConfig::default(),
            scheduler: SchedulerConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }

    pub fn region(&self) -> Result<Region> {
        if self.region.boroughs_file.is_some() {
            return Err(Error::config("region.boroughs_file", "file reference not resolved"));
        }
        region_from_records(&self.region.boroughs, "region.boroughs")
    }

    pub fn network(&self, region: &Region) -> Result<Network> {
        if self.stations.file.is_some() {
            return Err(Error::config("stations.file", "file reference not resolved"));
        }
        load_network(&self.stations.records, region)
    }

    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            walk_speed_kmh: self.walk_speed_kmh,
            roaming: self.policy.roaming,
        }
    }

    /// Replaces file references with the rows they point to.
    pub fn resolve(&mut self, base: &Path) -> Result<()> {
        if let Some(f) = self.region.boroughs_file.take() {
            if !self.region.boroughs.is_empty() {
                return Err(Error::config("region", "give either boroughs_file or inline boroughs"));
            }
            self.region.boroughs =
                read_boroughs_file(&base.join(&f)).map_err(|e| Error::config("region.boroughs_file", e.to_string()))?;
        }
        if let Some(f) = self.stations.file.take() {
            if !self.stations.records.is_empty() {
                return Err(Error::config("stations", "give either file or inline stations"));
            }
            self.stations.records =
                read_stations_file(&base.join(&f)).map_err(|e| Error::config("stations.file", e.to_string()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_days == 0 {
            return Err(Error::config("horizon_days", "must be >= 1"));
        }
        if !(self.walk_speed_kmh.is_finite() && self.walk_speed_kmh > 0.0) {
            return Err(Error::config("walk_speed_kmh", "must be > 0"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must fit in a signed 64-bit integer"));
        }
        let region = self.region()?;
        self.network(&region)?;
        if self.population_size > 0 && region.boroughs().is_empty() {
            return Err(Error::config(
                "region.boroughs",
                "a population needs at least one borough",
            ));
        }
        PopulationSampler::new(&self.demand)?;
        self.policy.validate()?;
        self.scheduler.validate()?;
        self.estimator.validate()?;
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn backticked(message: &str, after: &str) -> Option<String> {
    let rest = &message[message.find(after)? + after.len()..];
    let start = rest.find('`')? + 1;
    let end = start + rest[start..].find('`')?;
    Some(rest[start..end].to_string())
}

/// Dotted path of the key whose value starts at `offset`: the closest table
/// header above it plus the key on that line.
fn key_path_at(text: &str, offset: usize) -> Option<String> {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = &text[line_start..];
    let key = line[..line.find('=')?].trim().trim_matches('"');
    if key.is_empty() || key.starts_with('[') || key.starts_with('#') {
        return None;
    }
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|h| h.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    Some(match table {
        Some(t) if !t.is_empty() => format!("{t}.{key}"),
        _ => key.to_string(),
    })
}

fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let start = e.span().map(|s| s.start);
    let line = start.map_or(1, |s| line_of(text, s));
    if let Some(key) = backticked(&message, "unknown field") {
        return Error::UnknownKey { key, line };
    }
    if let Some(field) = backticked(&message, "missing field") {
        return Error::config(field, message);
    }
    let value_error = ["unknown variant", "invalid type", "invalid value"]
        .iter()
        .any(|p| message.starts_with(p));
    if let (true, Some(path)) = (value_error, start.and_then(|s| key_path_at(text, s))) {
        return Error::config(path, format!("{message} (line {line})"));
    }
    Error::Syntax { line, message }
}

/// Parses and validates a scenario. File references resolve against the
/// working directory.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_scenario_at(text, Path::new("."))
}

/// Parses and validates a scenario, resolving file references against `base`.
pub fn parse_scenario_at(text: &str, base: &Path) -> Result<Scenario> {
    let mut s: Scenario = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    s.resolve(base)?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_at(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Canonical text: fixed key order, every default spelled out.
pub fn write_scenario(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario values are TOML-representable")
}

/// Hex SHA-256 of the canonical text.
pub fn scenario_hash(s: &Scenario) -> String {
    hex::encode(Sha256::digest(write_scenario(s).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
population_size = 10

[[region.boroughs]]
borough_id = "A"
name = "Alpha"
zone = "inner"
ev_count = 100
poi_count = 10
area_km2 = 4.0

[stations]
"#;

    #[test]
    fn minimal_document_takes_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.population_size, 10);
        assert_eq!(s.horizon_days, 7);
        assert_eq!(s.demand, DemandConfig::default());
        assert_eq!(s.policy, PolicyConfig::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("population_size", "populaton_size");
        match parse_scenario(&text).unwrap_err() {
            Error::UnknownKey { key, line } => {
                assert_eq!(key, "populaton_size");
                assert_eq!(line, 2);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_distribution_names_field() {
        let text = format!("{MINIMAL}\n[demand.distributions.home_charger]\nyes = 0.5\nno = 0.4\n");
        match parse_scenario(&text).unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "demand.distributions.home_charger");
                assert!(message.contains("sum"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "population_size = 10\n\nregion = [\n";
        match parse_scenario(text).unwrap_err() {
            Error::Syntax { line, .. } => assert!(line >= 3, "{line}"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn round_trip_and_hash() {
        let s = parse_scenario(MINIMAL).unwrap();
        let text = write_scenario(&s);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_scenario(&back), text);
        assert_eq!(scenario_hash(&back), scenario_hash(&s));
        assert_eq!(scenario_hash(&s).len(), 64);
    }

    #[test]
    fn missing_required_key() {
        match parse_scenario("[region]\n[stations]\n").unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "population_size"),
            e => panic!("{e}"),
        }
    }
}
