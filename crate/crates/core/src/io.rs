//! CSV ingestion of boroughs and stations, and JSON/CSV report writing.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Borough, Region, Zone};
use crate::error::{Error, Result};
use crate::supply::StationRecord;

/// One row of the boroughs file. The last three columns are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoroughRecord {
    pub borough_id: String,
    pub name: String,
    pub zone: String,
    pub ev_count: u64,
    pub poi_count: u64,
    pub area_km2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid_x_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid_y_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poi_weight: Option<f64>,
}

impl BoroughRecord {
    pub fn to_borough(&self) -> std::result::Result<Borough, String> {
        let zone = Zone::parse(&self.zone).ok_or_else(|| format!("unknown zone `{}`", self.zone))?;
        let centroid = match (self.centroid_x_km, self.centroid_y_km) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => return Err("centroid needs both x and y".into()),
        };
        Ok(Borough {
            id: self.borough_id.clone(),
            name: self.name.clone(),
            zone,
            ev_count: self.ev_count,
            poi_count: self.poi_count,
            area: self.area_km2,
            centroid,
            poi_weight: self.poi_weight.unwrap_or(1.0),
        })
    }
}

/// Builds a region, reporting failures against 1-based data rows.
pub fn region_from_records(records: &[BoroughRecord], file: &str) -> Result<Region> {
    let boroughs = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.to_borough().map_err(|message| Error::Ingestion {
                file: file.to_string(),
                row: i + 1,
                message,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, b) in boroughs.iter().enumerate() {
        if boroughs[..i].iter().any(|o| o.id == b.id) {
            return Err(Error::Ingestion {
                file: file.to_string(),
                row: i + 1,
                message: format!("duplicate borough id `{}`", b.id),
            });
        }
    }
    Region::new(boroughs.clone()).map_err(|e| {
        // point at the first record that fails on its own, if any
        let row = boroughs
            .iter()
            .position(|b| Region::new(vec![b.clone()]).is_err())
            .map_or(0, |i| i + 1);
        let message = match e {
            Error::Argument(m) => m,
            other => other.to_string(),
        };
        Error::Ingestion {
            file: file.to_string(),
            row,
            message,
        }
    })
}

fn read_csv<T: for<'de> Deserialize<'de>>(reader: impl Read, file: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Ingestion {
                file: file.to_string(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(rows: &[T], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r).map_err(|e| Error::arg(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::arg(e.to_string()))
}

pub fn read_boroughs(reader: impl Read, file: &str) -> Result<Vec<BoroughRecord>> {
    read_csv(reader, file)
}

pub fn read_stations(reader: impl Read, file: &str) -> Result<Vec<StationRecord>> {
    read_csv(reader, file)
}

pub fn read_boroughs_file(path: &Path) -> Result<Vec<BoroughRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_boroughs(f, &path.display().to_string())
}

pub fn read_stations_file(path: &Path) -> Result<Vec<StationRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_stations(f, &path.display().to_string())
}

/// Writes borough rows with every optional column present.
pub fn write_boroughs(rows: &[BoroughRecord], writer: impl Write) -> Result<()> {
    #[derive(Serialize)]
    struct Full<'a> {
        borough_id: &'a str,
        name: &'a str,
        zone: &'a str,
        ev_count: u64,
        poi_count: u64,
        area_km2: f64,
        centroid_x_km: Option<f64>,
        centroid_y_km: Option<f64>,
        poi_weight: Option<f64>,
    }
    let full: Vec<Full> = rows
        .iter()
        .map(|r| Full {
            borough_id: &r.borough_id,
            name: &r.name,
            zone: &r.zone,
            ev_count: r.ev_count,
            poi_count: r.poi_count,
            area_km2: r.area_km2,
            centroid_x_km: r.centroid_x_km,
            centroid_y_km: r.centroid_y_km,
            poi_weight: r.poi_weight,
        })
        .collect();
    write_csv(&full, writer)
}

pub fn write_stations(rows: &[StationRecord], writer: impl Write) -> Result<()> {
    write_csv(rows, writer)
}

/// Serializes `value` as pretty JSON terminated by a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::arg(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json(value)?.as_bytes())
}

pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::arg(e.to_string()))
}
