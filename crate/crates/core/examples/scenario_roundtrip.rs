//! Loads a scenario file, validates it, writes its canonical form and shows
//! that the canonical text and hash are stable.
//!
//!     cargo run --example scenario_roundtrip [path/to/scenario.toml]

use std::path::PathBuf;

use evcharge::reference;
use evcharge::scenario::{load_scenario, parse_scenario, scenario_hash, write_scenario};

fn main() -> evcharge::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(reference::scenario_path);
    let s = load_scenario(&path)?;
    let text = write_scenario(&s);
    let back = parse_scenario(&text)?;
    println!("{}: {} boroughs, {} stations", s.name, s.region.boroughs.len(), s.stations.records.len());
    println!("canonical text {} bytes, {} lines", text.len(), text.lines().count());
    println!("hash           {}", scenario_hash(&s));
    println!("reparsed equal {}", back == s);
    println!("text stable    {}", write_scenario(&back) == text);

    let typo = text.replacen("population_size", "populaton_size", 1);
    if let Err(e) = parse_scenario(&typo) {
        println!("with a typo    {e}");
    }
    Ok(())
}
