//! Builders and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use evcharge::demand::{ChargeRequest, RequestKind};
use evcharge::domain::{AgentId, Location, RateClass, SocketType};
use evcharge::io::BoroughRecord;
use evcharge::matching::{MatchOutcome, MatchParams};
use evcharge::scenario::Scenario;
use evcharge::scheduler::{LoadCurve, Session};
use evcharge::supply::{
    Connector, ConnectorEvent, ConnectorState, Network, OfferedServices, Premises, Station, StationRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SPEED: f64 = 5.0;

/// Cost charged per rejected request when comparing batch outcomes. Larger
/// than any total walk a small instance can produce.
pub const REJECTION_PENALTY: f64 = 1e6;

pub fn params() -> MatchParams {
    MatchParams {
        walk_speed_kmh: SPEED,
        roaming: true,
    }
}

pub fn station(id: &str, x: f64, y: f64, sockets: &[(&str, f64)]) -> Station {
    Station {
        id: id.into(),
        operator_id: "op1".into(),
        location: Location::new(x, y, "A"),
        premises: Premises::OnStreet,
        connectors: sockets
            .iter()
            .map(|(s, p)| Connector::new(SocketType::new(*s, *p).unwrap()))
            .collect(),
        services: OfferedServices {
            reservable: true,
            charge_rate: 0.3,
            restricted_access: false,
            roaming_enabled: true,
            roaming_surcharge: 0.1,
            reserved_ev_parking: 0,
        },
    }
}

pub fn request(agent: AgentId, x: f64, y: f64, max_walk: f64) -> ChargeRequest {
    ChargeRequest {
        agent_id: agent,
        time: 0,
        destination: Location::new(x, y, "A"),
        energy_needed: 10.0,
        rate_class_wanted: RateClass::Fast,
        max_walk,
        subscriptions: ["op1".to_string()].into(),
        sockets: ["Type2".to_string()].into(),
        soc: 0.3,
        kind: RequestKind::Threshold,
    }
}

/// A random small matching instance: requests and single- or
/// double-connector stations on a 3 km square, at most `max_connectors`
/// connectors overall. Sockets vary so that feasibility is random.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    max_requests: usize,
    max_stations: usize,
    max_connectors: usize,
) -> (Vec<ChargeRequest>, Network) {
    let n_st = rng.gen_range(1..=max_stations);
    let mut left = max_connectors;
    let mut stations = Vec::new();
    for s in 0..n_st {
        if left == 0 {
            break;
        }
        let k = rng.gen_range(1..=2usize).min(left);
        left -= k;
        let sockets: Vec<(&str, f64)> = (0..k)
            .map(|_| {
                if rng.gen_bool(0.75) {
                    ("Type2", 22.0)
                } else {
                    ("CCS", 50.0)
                }
            })
            .collect();
        stations.push(station(
            &format!("S{s}"),
            rng.gen_range(0.0..3.0),
            rng.gen_range(0.0..3.0),
            &sockets,
        ));
    }
    let n_req = rng.gen_range(1..=max_requests);
    let requests = (0..n_req)
        .map(|a| {
            let mut r = request(
                a as AgentId,
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(5.0..30.0),
            );
            if rng.gen_bool(0.3) {
                r.sockets = ["CCS".to_string()].into();
            }
            if rng.gen_bool(0.2) {
                r.sockets.insert("Type2".to_string());
            }
            r
        })
        .collect();
    (requests, Network::from_stations(stations).unwrap())
}

/// (allocated count, total walk) of a batch outcome.
pub fn objective(outcomes: &[MatchOutcome]) -> (usize, f64) {
    let n = outcomes.iter().filter(|o| o.is_allocated()).count();
    (n, evcharge::matching::total_walk(outcomes))
}

pub fn penalised_cost(outcomes: &[MatchOutcome]) -> f64 {
    let (n, walk) = objective(outcomes);
    walk + (outcomes.len() - n) as f64 * REJECTION_PENALTY
}

/// Independent oracle: enumerates every injective partial map of requests to
/// connectors by explicit permutation, with no pruning, and returns the best
/// (count, walk) under "more allocations first, then less walking".
pub fn enumerate_optimum(requests: &[ChargeRequest], network: &Network) -> (usize, f64) {
    let mut cols = Vec::new();
    for st in network.stations() {
        for c in &st.connectors {
            cols.push((st, c));
        }
    }
    let feasible = |r: &ChargeRequest, col: usize| -> Option<f64> {
        let (st, c) = cols[col];
        let walk = r.destination.distance_km(&st.location) / SPEED * 60.0;
        let socket_ok = r.sockets.contains(&c.socket.id) && c.socket.rate_class >= r.rate_class_wanted;
        let access = r.subscriptions.contains(&st.operator_id)
            || (st.services.roaming_enabled && !st.services.restricted_access);
        (walk <= r.max_walk && socket_ok && access && c.is_free()).then_some(walk)
    };
    // choice[i] in 0..=cols.len(); cols.len() means "rejected"
    let mut best = (0usize, 0.0f64);
    let n = requests.len();
    let m = cols.len();
    let total = (m + 1).pow(n as u32);
    for code in 0..total {
        let mut x = code;
        let mut used = BTreeSet::new();
        let mut count = 0;
        let mut walk = 0.0;
        let mut ok = true;
        for r in requests {
            let c = x % (m + 1);
            x /= m + 1;
            if c == m {
                continue;
            }
            match feasible(r, c) {
                Some(w) if used.insert(c) => {
                    count += 1;
                    walk += w;
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && (count > best.0 || (count == best.0 && walk < best.1)) {
            best = (count, walk);
        }
    }
    best
}

pub fn borough(id: &str, zone: &str, ev: u64, poi: u64, area: f64, cx: f64, cy: f64) -> BoroughRecord {
    BoroughRecord {
        borough_id: id.into(),
        name: id.to_uppercase(),
        zone: zone.into(),
        ev_count: ev,
        poi_count: poi,
        area_km2: area,
        centroid_x_km: Some(cx),
        centroid_y_km: Some(cy),
        poi_weight: None,
    }
}

pub fn station_record(id: &str, borough: &str, x: f64, y: f64, sockets: &str) -> StationRecord {
    StationRecord {
        station_id: id.into(),
        operator_id: "op1".into(),
        borough_id: borough.into(),
        x_km: x,
        y_km: y,
        premises: "on_street".into(),
        sockets: sockets.into(),
        reservable: true,
        charge_rate: 0.3,
        restricted: false,
        roaming: true,
        surcharge: 0.1,
        reserved_parking: 1,
    }
}

/// Two boroughs and a handful of stations; small enough for fast engine tests.
pub fn small_scenario(population: u32) -> Scenario {
    let mut s = Scenario::minimal(population);
    s.name = "small".into();
    s.horizon_days = 3;
    s.region.boroughs = vec![
        borough("A", "inner", 600, 80, 4.0, 0.0, 0.0),
        borough("B", "outer", 400, 40, 9.0, 3.0, 0.0),
    ];
    s.stations.records = vec![
        station_record("S1", "A", 0.2, 0.1, "Type2:7;CCS:50"),
        station_record("S2", "A", -0.4, 0.3, "Type2:22"),
        station_record("S3", "A", 0.5, -0.6, "Type2:7;Type2:7;CHAdeMO:50"),
        station_record("S4", "B", 3.1, 0.2, "Type2:22;CCS:150;Type1:7"),
        station_record("S5", "B", 2.5, -0.9, "Type2:43;CHAdeMO:50"),
    ];
    s
}

// ---------------------------------------------------------------------------
// Connector state machine
// ---------------------------------------------------------------------------

/// The legal transition table, written out independently of the library.
pub fn oracle(state: ConnectorState, event: ConnectorEvent) -> Option<ConnectorState> {
    use ConnectorEvent as E;
    use ConnectorState as S;
    match (state, event) {
        (_, E::Fault) => Some(S::OutOfService),
        (S::Free, E::Reserve { agent, expiry }) => Some(S::Reserved { holder: agent, expiry }),
        (S::Free, E::PlugIn { agent }) => Some(S::Occupied { holder: agent }),
        (S::Reserved { holder, .. }, E::PlugIn { agent }) if holder == agent => Some(S::Occupied { holder }),
        (S::Reserved { .. }, E::Release) | (S::Occupied { .. }, E::Release) => Some(S::Free),
        (S::OutOfService, E::Repair) => Some(S::Free),
        _ => None,
    }
}

pub fn states() -> Vec<ConnectorState> {
    vec![
        ConnectorState::Free,
        ConnectorState::Reserved { holder: 1, expiry: 30 },
        ConnectorState::Occupied { holder: 1 },
        ConnectorState::OutOfService,
    ]
}

pub fn events() -> Vec<ConnectorEvent> {
    let mut v = Vec::new();
    for agent in [1, 2] {
        v.push(ConnectorEvent::Reserve { agent, expiry: 60 });
        v.push(ConnectorEvent::PlugIn { agent });
    }
    v.extend([ConnectorEvent::Release, ConnectorEvent::Fault, ConnectorEvent::Repair]);
    v
}

pub fn connector(state: ConnectorState) -> Connector {
    Connector {
        socket: SocketType::new("Type2", 7.0).unwrap(),
        state,
    }
}

pub fn random_event<R: Rng>(rng: &mut R, agents: u32) -> ConnectorEvent {
    let agent = rng.gen_range(0..agents) as AgentId;
    match rng.gen_range(0..5) {
        0 => ConnectorEvent::Reserve {
            agent,
            expiry: rng.gen_range(0..500),
        },
        1 => ConnectorEvent::PlugIn { agent },
        2 => ConnectorEvent::Release,
        3 => ConnectorEvent::Fault,
        _ => ConnectorEvent::Repair,
    }
}

// ---------------------------------------------------------------------------
// Scheduler instances
// ---------------------------------------------------------------------------

/// Random feasible sessions over a two-day half-hour grid.
pub fn scheduler_instance(seed: u64) -> (Vec<Session>, LoadCurve) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = 96;
    let base = LoadCurve::new(30, (0..slots).map(|_| rng.gen_range(40.0..160.0)).collect());
    let n = rng.gen_range(1..=14);
    let sessions = (0..n)
        .map(|i| {
            let plug = rng.gen_range(0..slots - 1);
            let dep = rng.gen_range(plug + 1..=slots.min(plug + 30));
            let p: f64 = [3.6, 7.0, 11.0, 22.0, 50.0][rng.gen_range(0..5)];
            let cap: f64 = rng.gen_range(20.0..80.0);
            let soc: f64 = rng.gen_range(0.2..0.9);
            let room = (1.0 - soc) * cap;
            let reach = p * 0.5 * (dep - plug) as f64;
            let energy = rng.gen_range(0.0..1.0) * room.min(reach * 0.95);
            Session {
                agent_id: i,
                plug_in: plug,
                departure: dep,
                energy_needed: energy,
                max_power: p,
                v2g_capable: rng.gen_bool(0.6),
                soc,
                desired_soc: soc + energy / cap,
                min_soc: 0.2f64.min(soc),
                battery_capacity: cap,
                discharges_used_this_year: rng.gen_range(0..25),
                degradation_cost: 0.001,
            }
        })
        .collect();
    (sessions, base)
}
