//! Deporting offers: a busy nearest station triggers an in-space offer to a
//! farther one, or an in-time offer to come back later, and the agent's
//! preferences decide.
//!
//!     cargo run --example deport_offers

use evcharge::demand::{accept_offer, build_population, ChargeRequest, RequestKind};
use evcharge::domain::{Location, RateClass};
use evcharge::matching::{propose_deport_offer, Candidate, OfferPolicy, RejectionReason};
use evcharge::reference::london_2019;

fn main() -> evcharge::Result<()> {
    let req = ChargeRequest {
        agent_id: 0,
        time: 600,
        destination: Location::new(0.0, 0.0, "westminster"),
        energy_needed: 15.0,
        rate_class_wanted: RateClass::Fast,
        max_walk: 15.0,
        subscriptions: ["op1".to_string()].into(),
        sockets: ["Type2".to_string()].into(),
        soc: 0.25,
        kind: RequestKind::Threshold,
    };
    let near = Candidate { station: 0, station_id: "NEAR".into(), walk_minutes: 4.0, surcharge: 0.0 };
    let far = Candidate { station: 1, station_id: "FAR".into(), walk_minutes: 12.0, surcharge: 0.0 };
    let policy = OfferPolicy { enabled: true, ..OfferPolicy::default() };

    let space = propose_deport_offer(&req, RejectionReason::StationsBusy, Some(&near), std::slice::from_ref(&far), &policy);
    let time = propose_deport_offer(&req, RejectionReason::StationsBusy, Some(&near), &[], &policy);
    for (label, p) in [("alternative free", &space), ("nothing else free", &time)] {
        match p {
            Some(p) => println!(
                "{label}: {:?} at {}, {:.0}% off, {:.0} extra minutes",
                p.offer.kind,
                p.target.station_id,
                100.0 * p.offer.discount,
                p.offer.extra_minutes
            ),
            None => println!("{label}: no offer"),
        }
    }

    let mut s = london_2019()?;
    s.population_size = 1000;
    let agents = build_population(&s, 3)?;
    for (label, p) in [("in space", space), ("in time", time)] {
        let offer = p.expect("an offer").offer;
        // fresh copies, so one offer does not spend budget for the next
        let yes = agents.iter().filter(|a| accept_offer(&mut (*a).clone(), &offer)).count();
        println!("{label}: {yes} of 1000 agents accept");
    }
    Ok(())
}
