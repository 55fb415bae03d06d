//! Operator roaming: who may charge where, at what surcharge, and what the
//! policy switch does to a whole run.
//!
//!     cargo run --release --example roaming

use std::collections::BTreeSet;

use evcharge::engine::run;
use evcharge::matching::access_for;
use evcharge::reference::london_2019;

fn main() -> evcharge::Result<()> {
    let mut s = london_2019()?;
    let region = s.region()?;
    let network = s.network(&region)?;
    let subs: BTreeSet<String> = ["op1".to_string()].into();

    let mut seen = BTreeSet::new();
    for st in network.stations() {
        let key = (
            st.operator_id == "op1",
            st.services.roaming_enabled,
            st.services.restricted_access,
        );
        if !seen.insert(key) {
            continue;
        }
        for policy in [true, false] {
            let d = access_for(&subs, st, policy);
            println!(
                "{} ({}, roaming {}, restricted {}) policy {:<5} -> allowed {:<5} surcharge {:.2}",
                st.id,
                st.operator_id,
                st.services.roaming_enabled,
                st.services.restricted_access,
                policy,
                d.allowed,
                d.surcharge
            );
        }
    }

    s.population_size = 3000;
    s.horizon_days = 3;
    for roaming in [true, false] {
        s.policy.roaming = roaming;
        let r = run(&s, s.seed)?;
        let surcharged = r.allocations.iter().filter(|a| a.surcharge > 0.0).count();
        println!(
            "roaming {:<5}: acceptance {:.3}, {} of {} sessions surcharged",
            roaming,
            r.acceptance_rate(),
            surcharged,
            r.allocations.len()
        );
    }
    Ok(())
}
