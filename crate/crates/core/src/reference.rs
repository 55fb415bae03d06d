//! The shipped greater-london-2019 scenario, embedded in the library.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{read_boroughs, read_stations};
use crate::scenario::Scenario;

pub const NAME: &str = "greater-london-2019";
pub const SCENARIO_TOML: &str = include_str!("../data/greater-london-2019/scenario.toml");
pub const BOROUGHS_CSV: &str = include_str!("../data/greater-london-2019/boroughs.csv");
pub const STATIONS_CSV: &str = include_str!("../data/greater-london-2019/stations.csv");

/// Directory holding the reference files in the source tree.
pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(NAME)
}

pub fn scenario_path() -> PathBuf {
    data_dir().join("scenario.toml")
}

/// The reference scenario with its CSV files inlined, without touching the
/// file system.
pub fn london_2019() -> Result<Scenario> {
    let mut s: Scenario = toml::from_str(SCENARIO_TOML).map_err(|e| Error::Syntax {
        line: 0,
        message: e.to_string(),
    })?;
    s.region.boroughs_file = None;
    s.region.boroughs = read_boroughs(BOROUGHS_CSV.as_bytes(), "boroughs.csv")?;
    s.stations.file = None;
    s.stations.records = read_stations(STATIONS_CSV.as_bytes(), "stations.csv")?;
    s.validate()?;
    Ok(s)
}
