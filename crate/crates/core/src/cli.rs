//! Command-line front end. `main.rs` only forwards `std::env::args` here.
//!
//! Exit status: 0 on success, 1 when a scenario or input fails validation or
//! a run fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::engine::{plan_for_day, run, run_many, DaySummary, SimulationResult};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimateReport};
use crate::io::{csv_string, to_json, write_file, write_json};
use crate::scenario::{load_scenario, scenario_hash, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "evcharge",
    version,
    about = "EV charging demand, supply and matching simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Suppress progress lines on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a scenario.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Per-borough demand/supply estimate (writes estimate.json and estimate.csv).
    Estimate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the simulation (writes result.json, or result-seed-N.json per seed).
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Several seeds, e.g. `1,2,5` or `1-8`.
        #[arg(long, conflicts_with = "seed")]
        seeds: Option<String>,
        /// Worker threads for multi-seed runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Smart-charging and V2G schedules for one simulated day.
    Schedule {
        #[arg(long)]
        scenario: PathBuf,
        /// Zero-based day of the horizon.
        #[arg(long)]
        day: u32,
    },
    /// Summary tables over the files in a directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Argument(_) => 2,
                _ => 1,
            }
        }
    }
}

fn say(g: &Global, line: impl AsRef<str>) {
    if !g.quiet {
        println!("{}", line.as_ref());
    }
}

fn load(path: &Path, g: &Global) -> Result<Scenario> {
    let s = load_scenario(path)?;
    if g.seed.is_some_and(|seed| seed > i64::MAX as u64) {
        return Err(Error::arg("--seed must fit in a signed 64-bit integer"));
    }
    Ok(s)
}

/// `--seed` picks the run seed; the scenario, and so its hash, stay as loaded.
fn run_seed(s: &Scenario, g: &Global) -> u64 {
    g.seed.unwrap_or(s.seed)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { scenario } => {
            let s = load(scenario, g)?;
            say(g, format!("{}: ok ({})", scenario.display(), scenario_hash(&s)));
            Ok(())
        }
        Command::Estimate { scenario } => {
            let s = load(scenario, g)?;
            let report = estimate_scenario(&s)?;
            write_json(&g.out.join("estimate.json"), &report)?;
            write_file(&g.out.join("estimate.csv"), csv_string(&report.boroughs)?.as_bytes())?;
            say(
                g,
                format!(
                    "{} boroughs, need {:.0} kWh/day, capacity {:.0} kWh/day, satisfaction {:.3}",
                    report.boroughs.len(),
                    report.aggregate.fleet_need_kwh_day,
                    report.aggregate.capacity_kwh_day,
                    report.aggregate.dos
                ),
            );
            Ok(())
        }
        Command::Simulate { scenario, seeds, jobs } => {
            let s = load(scenario, g)?;
            match seeds {
                None => {
                    let r = run(&s, run_seed(&s, g))?;
                    write_result(g, &r, "result")?;
                }
                Some(list) => {
                    let seeds = parse_seeds(list)?;
                    for r in run_many(&s, &seeds, *jobs)? {
                        write_result(g, &r, &format!("result-seed-{}", r.seed))?;
                    }
                }
            }
            Ok(())
        }
        Command::Schedule { scenario, day } => {
            let s = load(scenario, g)?;
            if !s.scheduler.enabled {
                say(g, "note: scheduler disabled in the scenario; scheduling anyway");
            }
            let r = run(&s, run_seed(&s, g))?;
            let report = schedule_report(&s, &r, *day)?;
            let stem = format!("schedule-day-{day}");
            write_json(&g.out.join(format!("{stem}.json")), &report)?;
            if g.format == Format::Csv {
                write_file(
                    &g.out.join(format!("{stem}.csv")),
                    csv_string(&report.slot_rows())?.as_bytes(),
                )?;
            }
            let d = &report.summary;
            say(
                g,
                format!(
                    "day {day}: {} sessions, peak uncontrolled {:.1} kW, valley fill {}, v2g {:.1} kW",
                    d.sessions,
                    d.uncontrolled.peak,
                    d.valley_fill
                        .as_ref()
                        .map_or("infeasible".to_string(), |m| format!("{:.1} kW", m.peak)),
                    d.v2g.peak
                ),
            );
            Ok(())
        }
        Command::Report { input } => {
            let report = collect_report(input)?;
            let text = match g.format {
                Format::Json => to_json(&report)?,
                Format::Csv => report_csv(&report)?,
            };
            print!("{text}");
            Ok(())
        }
    }
}

pub fn estimate_scenario(s: &Scenario) -> Result<EstimateReport> {
    let region = s.region()?;
    let network = s.network(&region)?;
    estimate(&s.name, &region, &network, &s.estimator)
}

fn write_result(g: &Global, r: &SimulationResult, stem: &str) -> Result<()> {
    write_json(&g.out.join(format!("{stem}.json")), r)?;
    if g.format == Format::Csv {
        write_file(
            &g.out.join(format!("{stem}-allocations.csv")),
            csv_string(&allocation_rows(r))?.as_bytes(),
        )?;
    }
    say(
        g,
        format!(
            "seed {}: {} requests, {} allocated, {} rejected",
            r.seed,
            r.requests,
            r.allocations.len(),
            r.rejections.len()
        ),
    );
    Ok(())
}

/// `1,2,5` or `1-8` (inclusive), or a mix: `1-3,9`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::arg(format!("bad seed list `{text}`"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AllocationRow<'a> {
    agent_id: u32,
    request_time: u32,
    station_id: &'a str,
    borough_id: &'a str,
    connector: usize,
    power_kw: f64,
    energy_kwh: f64,
    walk_minutes: f64,
    wait_minutes: f64,
    surcharge: f64,
    offer: &'a str,
    plug_in: u32,
    release: u32,
}

fn allocation_rows(r: &SimulationResult) -> Vec<AllocationRow<'_>> {
    r.allocations
        .iter()
        .map(|a| AllocationRow {
            agent_id: a.agent_id,
            request_time: a.request_time,
            station_id: &a.station_id,
            borough_id: &a.borough_id,
            connector: a.connector,
            power_kw: a.power_kw,
            energy_kwh: a.energy_kwh,
            walk_minutes: a.walk_minutes,
            wait_minutes: a.wait_minutes,
            surcharge: a.surcharge,
            offer: match a.offer.as_ref().map(|o| o.kind) {
                None => "",
                Some(crate::demand::OfferKind::DeportInSpace) => "in_space",
                Some(crate::demand::OfferKind::DeportInTime) => "in_time",
            },
            plug_in: a.plug_in,
            release: a.release,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Schedule report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub agent_id: u32,
    pub plug_in: usize,
    pub departure: usize,
    pub energy_kwh: f64,
    pub v2g_capable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley_fill_kw: Option<Vec<f64>>,
    pub v2g_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub day: u32,
    pub slot_minutes: u32,
    pub base_kw: Vec<f64>,
    pub uncontrolled_kw: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley_fill_kw: Option<Vec<f64>>,
    pub v2g_kw: Vec<f64>,
    pub sessions: Vec<SessionPlan>,
    pub summary: DaySummary,
}

#[derive(Debug, Serialize)]
pub struct SlotRow {
    pub slot: usize,
    pub base_kw: f64,
    pub uncontrolled_kw: f64,
    pub valley_fill_kw: Option<f64>,
    pub v2g_kw: f64,
}

impl ScheduleReport {
    pub fn slot_rows(&self) -> Vec<SlotRow> {
        (0..self.base_kw.len())
            .map(|i| SlotRow {
                slot: i,
                base_kw: self.base_kw[i],
                uncontrolled_kw: self.uncontrolled_kw[i],
                valley_fill_kw: self.valley_fill_kw.as_ref().map(|v| v[i]),
                v2g_kw: self.v2g_kw[i],
            })
            .collect()
    }
}

pub fn schedule_report(s: &Scenario, r: &SimulationResult, day: u32) -> Result<ScheduleReport> {
    let plan = plan_for_day(&s.scheduler, r, day)?;
    let valley = plan.valley.as_ref().ok();
    let sessions = plan
        .sessions
        .iter()
        .enumerate()
        .map(|(i, x)| SessionPlan {
            agent_id: x.agent_id,
            plug_in: x.plug_in,
            departure: x.departure,
            energy_kwh: x.energy_needed,
            v2g_capable: x.v2g_capable,
            valley_fill_kw: valley.map(|v| v.assignments[i].power.clone()),
            v2g_kw: plan.v2g.assignments[i].power.clone(),
        })
        .collect();
    Ok(ScheduleReport {
        scenario: s.name.clone(),
        scenario_hash: r.scenario_hash.clone(),
        seed: r.seed,
        day,
        slot_minutes: s.scheduler.slot_minutes,
        base_kw: plan.base.values.clone(),
        uncontrolled_kw: plan.uncontrolled.values.clone(),
        valley_fill_kw: valley.map(|v| v.total.values.clone()),
        v2g_kw: plan.v2g.total.values.clone(),
        sessions,
        summary: plan.summary,
    })
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub file: String,
    pub scenario: String,
    pub seed: u64,
    pub policy: String,
    pub requests: u64,
    pub allocations: usize,
    pub rejections: usize,
    pub acceptance_rate: f64,
    pub mean_walk_minutes: f64,
    pub mean_wait_minutes: f64,
    pub delivered_kwh: f64,
    pub queue_served: u64,
    pub offers_accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub file: String,
    pub day: u32,
    pub sessions: usize,
    pub uncontrolled_peak_kw: f64,
    pub valley_fill_peak_kw: Option<f64>,
    pub v2g_peak_kw: f64,
    pub discharged_kwh: f64,
    pub net_payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunSummary>,
    pub days: Vec<DayRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateReport>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Ingestion {
        file: path.display().to_string(),
        row: e.line(),
        message: e.to_string(),
    })
}

fn day_row(file: &str, d: &DaySummary) -> DayRow {
    DayRow {
        file: file.to_string(),
        day: d.day,
        sessions: d.sessions,
        uncontrolled_peak_kw: d.uncontrolled.peak,
        valley_fill_peak_kw: d.valley_fill.as_ref().map(|m| m.peak),
        v2g_peak_kw: d.v2g.peak,
        discharged_kwh: d.discharged_kwh,
        net_payment: d.net_payment,
    }
}

/// Gathers result, schedule and estimate files from `dir`, in file-name order.
pub fn collect_report(dir: &Path) -> Result<Report> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    let mut report = Report {
        runs: Vec::new(),
        days: Vec::new(),
        estimate: None,
    };
    for name in names {
        let path = dir.join(&name);
        if name.starts_with("result") {
            let r: SimulationResult = read_json(&path)?;
            report.runs.push(RunSummary {
                file: name.clone(),
                scenario: r.scenario.clone(),
                seed: r.seed,
                policy: r.policy.as_str().to_string(),
                requests: r.requests,
                allocations: r.allocations.len(),
                rejections: r.rejections.len(),
                acceptance_rate: r.acceptance_rate(),
                mean_walk_minutes: r.mean_walk_minutes(),
                mean_wait_minutes: r.mean_wait_minutes(),
                delivered_kwh: r.delivered_energy_kwh,
                queue_served: r.queue.served,
                offers_accepted: r.offers.accepted,
            });
            report.days.extend(r.schedules.iter().map(|d| day_row(&name, d)));
        } else if name.starts_with("schedule-day-") {
            let s: ScheduleReport = read_json(&path)?;
            report.days.push(day_row(&name, &s.summary));
        } else if name == "estimate.json" {
            report.estimate = Some(read_json(&path)?);
        }
    }
    if report.runs.is_empty() && report.days.is_empty() && report.estimate.is_none() {
        return Err(Error::arg(format!(
            "no result, schedule or estimate files in {}",
            dir.display()
        )));
    }
    Ok(report)
}

/// Tables separated by a blank line: runs, days, then boroughs.
pub fn report_csv(r: &Report) -> Result<String> {
    let mut parts = Vec::new();
    if !r.runs.is_empty() {
        parts.push(csv_string(&r.runs)?);
    }
    if !r.days.is_empty() {
        parts.push(csv_string(&r.days)?);
    }
    if let Some(e) = &r.estimate {
        parts.push(csv_string(&e.boroughs)?);
    }
    Ok(parts.join("\n"))
}
