//! Allocation of charge requests to connectors, plus the charging schemes
//! layered on top of it: roaming access, reservations, queues and deporting
//! offers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::demand::{ChargeRequest, Offer, OfferKind};
use crate::domain::{walk_time, AgentId, Minute, DEFAULT_WALK_SPEED_KMH};
use crate::error::{Error, Result};
use crate::supply::{connector_compatible, Connector, ConnectorEvent, ConnectorState, Network, Station};

/// Exhaustive search bound for [`allocate_optimal`], per side.
pub const OPTIMAL_MAX: usize = 10;

/// Walk totals closer than this are considered equal.
const WALK_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Policy configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyMode {
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "greedy+queue")]
    GreedyQueue,
    #[serde(rename = "greedy+reserve")]
    GreedyReserve,
}

impl PolicyMode {
    pub fn parse(s: &str) -> Option<PolicyMode> {
        match s.trim() {
            "greedy" => Some(PolicyMode::Greedy),
            "greedy+queue" => Some(PolicyMode::GreedyQueue),
            "greedy+reserve" => Some(PolicyMode::GreedyReserve),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Greedy => "greedy",
            PolicyMode::GreedyQueue => "greedy+queue",
            PolicyMode::GreedyReserve => "greedy+reserve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueuePolicy {
    /// How long a soft queue entry waits before giving up, minutes.
    pub patience_minutes: u32,
    /// Longest queue per station; further arrivals are rejected.
    pub max_length: usize,
    /// Serve agents who asked for priority charging first.
    pub priority: bool,
}

impl Default for QueuePolicy {
    fn default() -> Self {
        Self {
            patience_minutes: 60,
            max_length: 10,
            priority: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservationKind {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservationPolicy {
    pub kind: ReservationKind,
    /// Reservations are placed this long before the expected arrival.
    pub lead_minutes: u32,
    /// Holding time past the expected arrival.
    pub grace_minutes: u32,
    /// Booking-cost cap as a multiple of the one-hour fee.
    pub fee_cap_multiplier: f64,
}

impl Default for ReservationPolicy {
    fn default() -> Self {
        Self {
            kind: ReservationKind::Soft,
            lead_minutes: 30,
            grace_minutes: 15,
            fee_cap_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfferPolicy {
    pub enabled: bool,
    pub in_space: bool,
    pub in_time: bool,
    pub space_discount: f64,
    pub time_discount: f64,
    /// Extra walking an in-space offer may ask for, minutes.
    pub extra_minutes: f64,
    /// Delay proposed by an in-time offer, minutes.
    pub delay_minutes: u32,
    /// Chance the operator tenders an offer when one is possible.
    pub tender_probability: f64,
}

impl Default for OfferPolicy {
    fn default() -> Self {
        Self {
            enabled: false,
            in_space: true,
            in_time: true,
            space_discount: 0.25,
            time_discount: 0.50,
            extra_minutes: 10.0,
            delay_minutes: 10,
            tender_probability: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub roaming: bool,
    pub queue: QueuePolicy,
    pub reservation: ReservationPolicy,
    pub offers: OfferPolicy,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Greedy,
            roaming: true,
            queue: QueuePolicy::default(),
            reservation: ReservationPolicy::default(),
            offers: OfferPolicy::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |path: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(path, format!("{v} is not in [0, 1]")))
            }
        };
        frac("policy.offers.space_discount", self.offers.space_discount)?;
        frac("policy.offers.time_discount", self.offers.time_discount)?;
        frac("policy.offers.tender_probability", self.offers.tender_probability)?;
        if !(self.offers.extra_minutes >= 0.0) {
            return Err(Error::config("policy.offers.extra_minutes", "must be >= 0"));
        }
        if !(self.reservation.fee_cap_multiplier >= 1.0) {
            return Err(Error::config("policy.reservation.fee_cap_multiplier", "must be >= 1"));
        }
        if self.reservation.kind == ReservationKind::Soft
            && self.reservation.lead_minutes + self.reservation.grace_minutes == 0
        {
            return Err(Error::config(
                "policy.reservation",
                "soft reservations need a positive holding time",
            ));
        }
        if self.queue.max_length == 0 {
            return Err(Error::config("policy.queue.max_length", "must be >= 1"));
        }
        Ok(())
    }
}

/// Parameters shared by every allocation routine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub walk_speed_kmh: f64,
    /// Whether roaming between operator networks is switched on.
    pub roaming: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            walk_speed_kmh: DEFAULT_WALK_SPEED_KMH,
            roaming: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Access
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessDecision {
    pub allowed: bool,
    /// Multiplicative mark-up on the energy price.
    pub surcharge: f64,
}

/// Access rule for a set of subscriptions. Subscribers always get in at no
/// surcharge. Others get in through roaming when both the station and the
/// policy allow it, except at restricted-access stations.
pub fn access_for(subscriptions: &BTreeSet<String>, st: &Station, roaming_policy: bool) -> AccessDecision {
    if subscriptions.contains(&st.operator_id) {
        AccessDecision {
            allowed: true,
            surcharge: 0.0,
        }
    } else if roaming_policy && st.services.roaming_enabled && !st.services.restricted_access {
        AccessDecision {
            allowed: true,
            surcharge: st.services.roaming_surcharge,
        }
    } else {
        AccessDecision {
            allowed: false,
            surcharge: 0.0,
        }
    }
}

pub fn roaming_access(agent: &crate::demand::Agent, station: &Station) -> AccessDecision {
    access_for(&agent.preference.subscriptions, station, true)
}

// ---------------------------------------------------------------------------
// Allocation results
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub request: ChargeRequest,
    pub station_id: String,
    pub connector: usize,
    pub walk_minutes: f64,
    pub wait_minutes: f64,
    pub surcharge: f64,
    pub applied_offer: Option<Offer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    /// No compatible, accessible station within walking range.
    NoStationInRange,
    /// Compatible stations in range, all connectors taken.
    StationsBusy,
    /// The preferred station's queue is at capacity.
    QueueFull,
    /// A queued agent gave up waiting.
    QueueTimeout,
}

impl RejectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::NoStationInRange => "no_station_in_range",
            RejectionReason::StationsBusy => "stations_busy",
            RejectionReason::QueueFull => "queue_full",
            RejectionReason::QueueTimeout => "queue_timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub request: ChargeRequest,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MatchOutcome {
    Allocated(Allocation),
    Rejected(Rejection),
}

impl MatchOutcome {
    pub fn allocation(&self) -> Option<&Allocation> {
        match self {
            MatchOutcome::Allocated(a) => Some(a),
            MatchOutcome::Rejected(_) => None,
        }
    }

    pub fn is_allocated(&self) -> bool {
        matches!(self, MatchOutcome::Allocated(_))
    }
}

/// Total walk of the allocated requests.
pub fn total_walk(outcomes: &[MatchOutcome]) -> f64 {
    outcomes
        .iter()
        .filter_map(MatchOutcome::allocation)
        .map(|a| a.walk_minutes)
        .sum()
}

// ---------------------------------------------------------------------------
// Candidate stations
// ---------------------------------------------------------------------------

/// A station that could serve a request, with the price of getting there.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub station: usize,
    pub station_id: String,
    pub walk_minutes: f64,
    pub surcharge: f64,
}

/// Whether the connector may be handed to `agent` right now.
pub fn connector_available(c: &Connector, agent: AgentId) -> bool {
    match c.state {
        ConnectorState::Free => true,
        ConnectorState::Reserved { holder, .. } => holder == agent,
        _ => false,
    }
}

/// Compatible, accessible stations within `limit` walking minutes, nearest
/// first, ties by station id. Availability is not checked.
pub fn candidates(req: &ChargeRequest, network: &Network, params: &MatchParams, limit: f64) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = network
        .stations()
        .iter()
        .enumerate()
        .filter_map(|(i, st)| {
            let walk = walk_time(&req.destination, &st.location, params.walk_speed_kmh).ok()?;
            if walk > limit || !st.connectors.iter().any(|c| connector_compatible(req, c)) {
                return None;
            }
            let access = access_for(&req.subscriptions, st, params.roaming);
            access.allowed.then(|| Candidate {
                station: i,
                station_id: st.id.clone(),
                walk_minutes: walk,
                surcharge: access.surcharge,
            })
        })
        .collect();
    // stations are stored in id order, so a stable sort on walk keeps id ties
    out.sort_by(|a, b| a.walk_minutes.total_cmp(&b.walk_minutes));
    out
}

/// Lowest-index connector of `st` that can serve the request now.
pub fn free_connector(req: &ChargeRequest, st: &Station) -> Option<usize> {
    st.connectors
        .iter()
        .position(|c| connector_compatible(req, c) && connector_available(c, req.agent_id))
}

/// Hands connector `idx` of the candidate station to the request.
pub fn commit(
    network: &mut Network,
    req: &ChargeRequest,
    cand: &Candidate,
    idx: usize,
    wait_minutes: f64,
    applied_offer: Option<Offer>,
) -> Result<Allocation> {
    let st = &mut network.stations_mut()[cand.station];
    st.connectors[idx].apply(ConnectorEvent::PlugIn { agent: req.agent_id })?;
    Ok(Allocation {
        request: req.clone(),
        station_id: cand.station_id.clone(),
        connector: idx,
        walk_minutes: cand.walk_minutes,
        wait_minutes,
        surcharge: cand.surcharge,
        applied_offer,
    })
}

/// Result of a greedy attempt for one request, with the candidate list kept
/// for follow-up schemes.
#[derive(Debug, Clone)]
pub enum GreedyAttempt {
    Allocated(Allocation),
    Failed {
        reason: RejectionReason,
        /// Compatible stations in walking range, nearest first.
        in_range: Vec<Candidate>,
    },
}

/// Greedy allocation of a single request.
pub fn greedy_one(
    req: &ChargeRequest,
    network: &mut Network,
    now: Minute,
    params: &MatchParams,
) -> Result<GreedyAttempt> {
    let in_range = candidates(req, network, params, req.max_walk);
    for cand in &in_range {
        let st = &mut network.stations_mut()[cand.station];
        st.expire_reservations(now);
        if let Some(idx) = free_connector(req, st) {
            return Ok(GreedyAttempt::Allocated(commit(network, req, cand, idx, 0.0, None)?));
        }
    }
    let reason = if in_range.is_empty() {
        RejectionReason::NoStationInRange
    } else {
        RejectionReason::StationsBusy
    };
    Ok(GreedyAttempt::Failed { reason, in_range })
}

/// Online nearest-available allocation in batch order.
pub fn allocate_greedy(
    batch: &[ChargeRequest],
    network: &mut Network,
    now: Minute,
    params: &MatchParams,
) -> Vec<MatchOutcome> {
    batch
        .iter()
        .map(|req| match greedy_one(req, network, now, params) {
            Ok(GreedyAttempt::Allocated(a)) => MatchOutcome::Allocated(a),
            Ok(GreedyAttempt::Failed { reason, .. }) => MatchOutcome::Rejected(Rejection {
                request: req.clone(),
                reason,
            }),
            // a Free connector always accepts PlugIn
            Err(e) => unreachable!("greedy plug-in on an available connector failed: {e}"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Exhaustive optimum
// ---------------------------------------------------------------------------

/// Best assignment of rows to distinct columns. `cost[r][c]` is `None` when
/// the pair is infeasible. The objective is lexicographic: assign as many rows
/// as possible, then minimise the summed cost. Among equal optima the first in
/// depth-first order wins, where row `r` tries columns in index order and
/// staying unassigned last.
pub fn min_cost_assignment(cost: &[Vec<Option<f64>>]) -> (Vec<Option<usize>>, f64) {
    struct Search<'a> {
        cost: &'a [Vec<Option<f64>>],
        options: Vec<Vec<(usize, f64)>>,
        used: Vec<bool>,
        current: Vec<Option<usize>>,
        best: Vec<Option<usize>>,
        best_count: usize,
        best_walk: f64,
        found: bool,
    }

    impl Search<'_> {
        fn go(&mut self, row: usize, count: usize, walk: f64) {
            let left = self.cost.len() - row;
            if self.found
                && (count + left < self.best_count
                    || (count + left == self.best_count && walk >= self.best_walk - WALK_EPS))
            {
                return;
            }
            if row == self.cost.len() {
                self.best = self.current.clone();
                self.best_count = count;
                self.best_walk = walk;
                self.found = true;
                return;
            }
            for k in 0..self.options[row].len() {
                let (col, w) = self.options[row][k];
                if self.used[col] {
                    continue;
                }
                self.used[col] = true;
                self.current[row] = Some(col);
                self.go(row + 1, count + 1, walk + w);
                self.used[col] = false;
                self.current[row] = None;
            }
            self.go(row + 1, count, walk);
        }
    }

    let cols = cost.iter().map(Vec::len).max().unwrap_or(0);
    let options = cost
        .iter()
        .map(|row| row.iter().enumerate().filter_map(|(c, w)| w.map(|w| (c, w))).collect())
        .collect();
    let mut s = Search {
        cost,
        options,
        used: vec![false; cols],
        current: vec![None; cost.len()],
        best: vec![None; cost.len()],
        best_count: 0,
        best_walk: 0.0,
        found: false,
    };
    s.go(0, 0, 0.0);
    (s.best, s.best_walk)
}

/// Exhaustive optimal batch allocation; a test oracle for the greedy matcher.
/// Connectors are indexed in (station id, connector index) order. The network
/// is left unchanged.
pub fn allocate_optimal(batch: &[ChargeRequest], network: &Network, params: &MatchParams) -> Result<Vec<MatchOutcome>> {
    if batch.len() > OPTIMAL_MAX {
        return Err(Error::Size(format!(
            "{} requests exceed the bound of {OPTIMAL_MAX}",
            batch.len()
        )));
    }
    // columns: every connector usable by at least one request
    let per_request: Vec<Vec<Candidate>> = batch
        .iter()
        .map(|r| candidates(r, network, params, r.max_walk))
        .collect();
    let mut columns: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (req, cands) in batch.iter().zip(&per_request) {
        for cand in cands {
            let st = &network.stations()[cand.station];
            for (ci, c) in st.connectors.iter().enumerate() {
                if connector_compatible(req, c) && connector_available(c, req.agent_id) {
                    columns.insert((cand.station, ci), 0);
                }
            }
        }
    }
    if columns.len() > OPTIMAL_MAX {
        return Err(Error::Size(format!(
            "{} usable connectors exceed the bound of {OPTIMAL_MAX}",
            columns.len()
        )));
    }
    for (i, v) in columns.values_mut().enumerate() {
        *v = i;
    }
    let keys: Vec<(usize, usize)> = columns.keys().copied().collect();
    let mut cost = vec![vec![None; keys.len()]; batch.len()];
    for (r, (req, cands)) in batch.iter().zip(&per_request).enumerate() {
        for cand in cands {
            let st = &network.stations()[cand.station];
            for (ci, c) in st.connectors.iter().enumerate() {
                if connector_compatible(req, c) && connector_available(c, req.agent_id) {
                    cost[r][columns[&(cand.station, ci)]] = Some(cand.walk_minutes);
                }
            }
        }
    }
    let (assign, _) = min_cost_assignment(&cost);
    Ok(batch
        .iter()
        .zip(&per_request)
        .zip(assign)
        .map(|((req, cands), col)| match col {
            Some(col) => {
                let (si, ci) = keys[col];
                let cand = cands
                    .iter()
                    .find(|c| c.station == si)
                    .expect("column built from candidates");
                MatchOutcome::Allocated(Allocation {
                    request: req.clone(),
                    station_id: cand.station_id.clone(),
                    connector: ci,
                    walk_minutes: cand.walk_minutes,
                    wait_minutes: 0.0,
                    surcharge: cand.surcharge,
                    applied_offer: None,
                })
            }
            None => MatchOutcome::Rejected(Rejection {
                request: req.clone(),
                reason: if cands.is_empty() {
                    RejectionReason::NoStationInRange
                } else {
                    RejectionReason::StationsBusy
                },
            }),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Reservations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationResult {
    pub station_id: String,
    pub connector: usize,
    pub kind: ReservationKind,
    pub expiry: Minute,
    /// Commitment fee, zero for soft reservations.
    pub fee: f64,
}

/// Fee for holding a connector: the station's energy price times connector
/// power for the holding time (at least one hour), capped at
/// `cap_multiplier` one-hour fees.
pub fn commitment_fee(charge_rate: f64, power: f64, hold_minutes: u32, cap_multiplier: f64) -> f64 {
    let hours = (f64::from(hold_minutes) / 60.0).max(1.0).min(cap_multiplier);
    charge_rate * power * hours
}

/// Reserves the first Free connector of the station.
pub fn reserve(
    network: &mut Network,
    station_id: &str,
    agent_id: AgentId,
    kind: ReservationKind,
    now: Minute,
    hold_minutes: u32,
    policy: &ReservationPolicy,
) -> Result<ReservationResult> {
    reserve_where(network, station_id, agent_id, kind, now, hold_minutes, policy, |_| true)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn reserve_where(
    network: &mut Network,
    station_id: &str,
    agent_id: AgentId,
    kind: ReservationKind,
    now: Minute,
    hold_minutes: u32,
    policy: &ReservationPolicy,
    usable: impl Fn(&Connector) -> bool,
) -> Result<ReservationResult> {
    let st = network.station_mut(station_id)?;
    if !st.services.reservable {
        return Err(Error::Policy(format!(
            "station `{station_id}` does not take reservations"
        )));
    }
    if kind == ReservationKind::Soft && hold_minutes == 0 {
        return Err(Error::Policy("soft reservations must expire".into()));
    }
    st.expire_reservations(now);
    let idx = st
        .connectors
        .iter()
        .position(|c| c.is_free() && usable(c))
        .ok_or_else(|| Error::Unavailable(station_id.to_string()))?;
    let expiry = now + hold_minutes;
    st.connectors[idx].apply(ConnectorEvent::Reserve {
        agent: agent_id,
        expiry,
    })?;
    let fee = match kind {
        ReservationKind::Soft => 0.0,
        ReservationKind::Hard => commitment_fee(
            st.services.charge_rate,
            st.connectors[idx].socket.power,
            hold_minutes,
            policy.fee_cap_multiplier,
        ),
    };
    Ok(ReservationResult {
        station_id: station_id.to_string(),
        connector: idx,
        kind,
        expiry,
        fee,
    })
}

// ---------------------------------------------------------------------------
// Queues
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub station_id: String,
    pub agent_id: AgentId,
    pub enqueue_time: Minute,
    pub kind: ReservationKind,
    /// Set for soft entries.
    pub expiry: Option<Minute>,
    /// Fee committed by a hard entry.
    pub committed_fee: f64,
    pub priority: bool,
    /// Caller-side handle, e.g. the request the entry stands for.
    pub ticket: usize,
}

/// Per-station waiting lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Queues {
    lines: BTreeMap<String, VecDeque<QueueEntry>>,
    patience: Minute,
    priority: bool,
}

impl Queues {
    /// `patience` is the expiry horizon of entries added with [`Queues::enqueue`].
    pub fn new(patience: Minute, priority: bool) -> Self {
        Self {
            lines: BTreeMap::new(),
            patience,
            priority,
        }
    }

    /// Adds a soft entry expiring after the default patience; returns the
    /// 1-based position.
    pub fn enqueue(&mut self, station_id: &str, agent_id: AgentId, now: Minute) -> usize {
        self.push(QueueEntry {
            station_id: station_id.to_string(),
            agent_id,
            enqueue_time: now,
            kind: ReservationKind::Soft,
            expiry: Some(now + self.patience),
            committed_fee: 0.0,
            priority: false,
            ticket: 0,
        })
    }

    /// Adds an entry. With priority enabled, flagged entries go behind the
    /// last flagged entry, ahead of everyone else.
    pub fn push(&mut self, entry: QueueEntry) -> usize {
        let line = self.lines.entry(entry.station_id.clone()).or_default();
        let at = if self.priority && entry.priority {
            line.iter().take_while(|e| e.priority).count()
        } else {
            line.len()
        };
        line.insert(at, entry);
        at + 1
    }

    pub fn queue_position(&self, station_id: &str, agent_id: AgentId) -> Result<usize> {
        self.lines
            .get(station_id)
            .and_then(|l| l.iter().position(|e| e.agent_id == agent_id))
            .map(|p| p + 1)
            .ok_or_else(|| Error::Lookup(format!("agent {agent_id} is not queued at `{station_id}`")))
    }

    /// Pops the first live entry; soft entries past expiry are discarded.
    pub fn notify_next(&mut self, station_id: &str, now: Minute) -> Option<AgentId> {
        self.pop_entry(station_id, now).map(|e| e.agent_id)
    }

    pub fn pop_entry(&mut self, station_id: &str, now: Minute) -> Option<QueueEntry> {
        let line = self.lines.get_mut(station_id)?;
        while let Some(e) = line.pop_front() {
            if e.expiry.is_none_or(|x| x > now) {
                return Some(e);
            }
        }
        None
    }

    /// Pops the first live entry satisfying `usable`, discarding expired
    /// soft entries met on the way.
    pub fn pop_first_where(
        &mut self,
        station_id: &str,
        now: Minute,
        usable: impl Fn(&QueueEntry) -> bool,
    ) -> Option<QueueEntry> {
        let line = self.lines.get_mut(station_id)?;
        line.retain(|e| e.expiry.is_none_or(|x| x > now));
        let p = line.iter().position(usable)?;
        line.remove(p)
    }

    pub fn remove_ticket(&mut self, station_id: &str, ticket: usize) -> Option<QueueEntry> {
        let line = self.lines.get_mut(station_id)?;
        let p = line.iter().position(|e| e.ticket == ticket)?;
        line.remove(p)
    }

    pub fn remove(&mut self, station_id: &str, agent_id: AgentId) -> Option<QueueEntry> {
        let line = self.lines.get_mut(station_id)?;
        let p = line.iter().position(|e| e.agent_id == agent_id)?;
        line.remove(p)
    }

    pub fn len(&self, station_id: &str) -> usize {
        self.lines.get(station_id).map_or(0, VecDeque::len)
    }

    pub fn hard_len(&self, station_id: &str) -> usize {
        self.lines
            .get(station_id)
            .map_or(0, |l| l.iter().filter(|e| e.kind == ReservationKind::Hard).count())
    }

    pub fn is_empty(&self) -> bool {
        self.lines.values().all(VecDeque::is_empty)
    }
}

// ---------------------------------------------------------------------------
// Deporting offers
// ---------------------------------------------------------------------------

/// An offer and where it sends the request.
#[derive(Debug, Clone, PartialEq)]
pub struct DeportProposal {
    pub offer: Offer,
    pub target: Candidate,
}

/// Proposes an offer after the preferred station failed. `preferred` is the
/// nearest in-range station (busy), `alternatives` every compatible station
/// within range plus the policy's extra walk, each with a connector free.
/// In-space offers are tried before in-time offers.
pub fn propose_deport_offer(
    req: &ChargeRequest,
    reason: RejectionReason,
    preferred: Option<&Candidate>,
    alternatives: &[Candidate],
    policy: &OfferPolicy,
) -> Option<DeportProposal> {
    if policy.in_space {
        let base = preferred.map_or(req.max_walk, |p| p.walk_minutes);
        let limit = req.max_walk + policy.extra_minutes;
        let alt = alternatives
            .iter()
            .filter(|a| preferred.is_none_or(|p| p.station != a.station))
            .filter(|a| a.walk_minutes <= limit)
            .min_by(|a, b| a.walk_minutes.total_cmp(&b.walk_minutes));
        if let Some(alt) = alt {
            return Some(DeportProposal {
                offer: Offer {
                    kind: OfferKind::DeportInSpace,
                    discount: policy.space_discount,
                    extra_minutes: (alt.walk_minutes - base).max(0.0),
                },
                target: alt.clone(),
            });
        }
    }
    if policy.in_time && reason == RejectionReason::StationsBusy {
        if let Some(p) = preferred {
            return Some(DeportProposal {
                offer: Offer {
                    kind: OfferKind::DeportInTime,
                    discount: policy.time_discount,
                    extra_minutes: f64::from(policy.delay_minutes),
                },
                target: p.clone(),
            });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::RequestKind;
    use crate::domain::{Location, RateClass, SocketType};
    use crate::supply::{OfferedServices, Premises};

    fn station(id: &str, x: f64, sockets: &[(&str, f64)]) -> Station {
        Station {
            id: id.into(),
            operator_id: "op".into(),
            location: Location::new(x, 0.0, "B"),
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

    fn request(agent: AgentId) -> ChargeRequest {
        ChargeRequest {
            agent_id: agent,
            time: 0,
            destination: Location::new(0.0, 0.0, "B"),
            energy_needed: 10.0,
            rate_class_wanted: RateClass::Fast,
            max_walk: 15.0,
            subscriptions: ["op".to_string()].into(),
            sockets: ["Type2".to_string()].into(),
            soc: 0.2,
            kind: RequestKind::Threshold,
        }
    }

    fn net(stations: Vec<Station>) -> Network {
        Network::from_stations(stations).unwrap()
    }

    #[test]
    fn greedy_takes_nearest() {
        let mut n = net(vec![
            station("S1", 1.0, &[("Type2", 7.0)]),
            station("S2", 0.5, &[("Type2", 7.0)]),
        ]);
        let out = allocate_greedy(&[request(1)], &mut n, 0, &MatchParams::default());
        let a = out[0].allocation().unwrap();
        assert_eq!(a.station_id, "S2");
        assert!((a.walk_minutes - 6.0).abs() < 1e-12);
        assert!(matches!(
            n.station("S2").unwrap().connectors[0].state,
            ConnectorState::Occupied { holder: 1 }
        ));
    }

    #[test]
    fn greedy_rejects_out_of_range() {
        let mut n = net(vec![station("S1", 2.0, &[("Type2", 7.0)])]);
        let out = allocate_greedy(&[request(1)], &mut n, 0, &MatchParams::default());
        assert!(matches!(&out[0], MatchOutcome::Rejected(r) if r.reason == RejectionReason::NoStationInRange));
    }

    #[test]
    fn greedy_tie_breaks_by_id() {
        let mut n = net(vec![
            station("S2", 0.5, &[("Type2", 7.0)]),
            station("S1", -0.5, &[("Type2", 7.0)]),
        ]);
        let out = allocate_greedy(&[request(1)], &mut n, 0, &MatchParams::default());
        assert_eq!(out[0].allocation().unwrap().station_id, "S1");
    }

    #[test]
    fn greedy_busy_and_conservation() {
        let mut n = net(vec![station("S1", 0.5, &[("Type2", 7.0)])]);
        let out = allocate_greedy(&[request(1), request(2)], &mut n, 0, &MatchParams::default());
        assert_eq!(out.len(), 2);
        assert!(out[0].is_allocated());
        assert!(matches!(&out[1], MatchOutcome::Rejected(r) if r.reason == RejectionReason::StationsBusy));
    }

    #[test]
    fn min_cost_assignment_example() {
        let c = vec![vec![Some(1.0), Some(2.0)], vec![Some(2.0), Some(4.0)]];
        let (a, w) = min_cost_assignment(&c);
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert_eq!(w, 4.0);
    }

    #[test]
    fn optimal_trivial_cases() {
        let n = net(vec![station("S1", 0.5, &[("Type2", 7.0)])]);
        let out = allocate_optimal(&[request(1)], &n, &MatchParams::default()).unwrap();
        assert_eq!(out[0].allocation().unwrap().station_id, "S1");
        assert!(allocate_optimal(&[], &n, &MatchParams::default()).unwrap().is_empty());
    }

    #[test]
    fn optimal_beats_greedy_on_example() {
        // positions in walking minutes, scaled to km at 5 km/h; walks form
        // the matrix [[1,2],[2,4]]
        let km = |m: f64| m / 12.0;
        let mut r1 = request(1);
        let mut r2 = request(2);
        r1.destination = Location::new(km(1.0), 0.0, "B");
        r2.destination = Location::new(km(-0.5), km(3.75f64.sqrt()), "B");
        let s1 = Station {
            location: Location::new(0.0, 0.0, "B"),
            ..station("S1", 0.0, &[("Type2", 7.0)])
        };
        let s2 = Station {
            location: Location::new(km(3.0), 0.0, "B"),
            ..station("S2", 0.0, &[("Type2", 7.0)])
        };
        let n = net(vec![s1, s2]);
        let params = MatchParams::default();
        let batch = [r1, r2];
        let opt = allocate_optimal(&batch, &n, &params).unwrap();
        assert_eq!(opt[0].allocation().unwrap().station_id, "S2");
        assert_eq!(opt[1].allocation().unwrap().station_id, "S1");
        assert!((total_walk(&opt) - 4.0).abs() < 1e-9);
        let greedy = allocate_greedy(&batch, &mut n.clone(), 0, &params);
        assert!((total_walk(&greedy) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn optimal_size_bound() {
        let n = net(vec![station("S1", 0.0, &[("Type2", 7.0)])]);
        let batch: Vec<_> = (0..11).map(request).collect();
        assert!(matches!(
            allocate_optimal(&batch, &n, &MatchParams::default()),
            Err(Error::Size(_))
        ));
        let many = net((0..11)
            .map(|i| station(&format!("S{i:02}"), 0.0, &[("Type2", 7.0)]))
            .collect());
        assert!(matches!(
            allocate_optimal(&[request(1)], &many, &MatchParams::default()),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn reserve_examples() {
        let policy = ReservationPolicy::default();
        let mut n = net(vec![station("S1", 0.0, &[("Type2", 7.0)])]);
        let r = reserve(&mut n, "S1", 7, ReservationKind::Soft, 100, 30, &policy).unwrap();
        assert_eq!(r.expiry, 130);
        assert_eq!(r.fee, 0.0);
        assert_eq!(
            n.station("S1").unwrap().connectors[0].state,
            ConnectorState::Reserved { holder: 7, expiry: 130 }
        );

        let mut busy = net(vec![station("S1", 0.0, &[("Type2", 7.0)])]);
        busy.station_mut("S1").unwrap().connectors[0]
            .apply(ConnectorEvent::PlugIn { agent: 1 })
            .unwrap();
        assert!(matches!(
            reserve(&mut busy, "S1", 7, ReservationKind::Soft, 0, 30, &policy),
            Err(Error::Unavailable(_))
        ));

        let mut closed = net(vec![station("S1", 0.0, &[("Type2", 7.0)])]);
        closed.station_mut("S1").unwrap().services.reservable = false;
        assert!(matches!(
            reserve(&mut closed, "S1", 7, ReservationKind::Hard, 0, 30, &policy),
            Err(Error::Policy(_))
        ));
    }

    #[test]
    fn hard_reservation_fee_is_capped() {
        // one hour at 0.3 per kWh on 7 kW
        assert!((commitment_fee(0.3, 7.0, 30, 2.0) - 2.1).abs() < 1e-12);
        assert!((commitment_fee(0.3, 7.0, 90, 2.0) - 3.15).abs() < 1e-12);
        assert!((commitment_fee(0.3, 7.0, 600, 2.0) - 4.2).abs() < 1e-12);
        let mut n = net(vec![station("S1", 0.0, &[("Type2", 7.0)])]);
        let r = reserve(
            &mut n,
            "S1",
            7,
            ReservationKind::Hard,
            0,
            60,
            &ReservationPolicy::default(),
        )
        .unwrap();
        assert!((r.fee - 2.1).abs() < 1e-12);
    }

    #[test]
    fn queue_fifo() {
        let mut q = Queues::new(60, false);
        assert_eq!(q.enqueue("S1", 1, 0), 1);
        assert_eq!(q.enqueue("S1", 2, 0), 2);
        assert_eq!(q.queue_position("S1", 2).unwrap(), 2);
        assert_eq!(q.notify_next("S1", 5), Some(1));
        assert_eq!(q.queue_position("S1", 2).unwrap(), 1);
        assert!(matches!(q.queue_position("S1", 1), Err(Error::Lookup(_))));
        assert_eq!(q.notify_next("S9", 5), None);
    }

    #[test]
    fn queue_drops_expired_soft_entries() {
        let mut q = Queues::new(10, false);
        q.enqueue("S1", 1, 0);
        q.enqueue("S1", 2, 5);
        assert_eq!(q.notify_next("S1", 12), Some(2));
        assert_eq!(q.notify_next("S1", 12), None);
    }

    #[test]
    fn priority_is_stable_within_class() {
        let mut q = Queues::new(60, true);
        let e = |a, p| QueueEntry {
            station_id: "S".into(),
            agent_id: a,
            enqueue_time: 0,
            kind: ReservationKind::Soft,
            expiry: Some(60),
            committed_fee: 0.0,
            priority: p,
            ticket: a as usize,
        };
        q.push(e(1, false));
        q.push(e(2, true));
        q.push(e(3, false));
        assert_eq!(q.push(e(4, true)), 2);
        let order: Vec<_> = std::iter::from_fn(|| q.notify_next("S", 0)).collect();
        assert_eq!(order, vec![2, 4, 1, 3]);
    }

    #[test]
    fn roaming_examples() {
        let mut st = station("S1", 0.0, &[("Type2", 7.0)]);
        let subs: BTreeSet<String> = ["op".to_string()].into();
        let none = BTreeSet::new();
        assert_eq!(
            access_for(&subs, &st, true),
            AccessDecision {
                allowed: true,
                surcharge: 0.0
            }
        );
        assert_eq!(
            access_for(&none, &st, true),
            AccessDecision {
                allowed: true,
                surcharge: 0.1
            }
        );
        st.services.roaming_enabled = false;
        assert_eq!(
            access_for(&none, &st, true),
            AccessDecision {
                allowed: false,
                surcharge: 0.0
            }
        );
        st.services.roaming_enabled = true;
        assert!(!access_for(&none, &st, false).allowed);
        st.services.restricted_access = true;
        assert!(!access_for(&none, &st, true).allowed);
        assert!(access_for(&subs, &st, false).allowed);
    }

    fn cand(station: usize, walk: f64) -> Candidate {
        Candidate {
            station,
            station_id: format!("S{station}"),
            walk_minutes: walk,
            surcharge: 0.0,
        }
    }

    #[test]
    fn deport_in_space() {
        let req = request(1);
        let policy = OfferPolicy::default();
        let preferred = cand(0, 6.0);
        let p = propose_deport_offer(
            &req,
            RejectionReason::StationsBusy,
            Some(&preferred),
            &[cand(1, 9.0), cand(2, 12.0)],
            &policy,
        )
        .unwrap();
        assert_eq!(p.offer.kind, OfferKind::DeportInSpace);
        assert_eq!(p.offer.discount, 0.25);
        assert!((p.offer.extra_minutes - 3.0).abs() < 1e-12);
        assert_eq!(p.target.station, 1);
    }

    #[test]
    fn deport_none_without_alternative() {
        let req = request(1);
        let policy = OfferPolicy {
            in_time: false,
            ..OfferPolicy::default()
        };
        let preferred = cand(0, 6.0);
        assert!(propose_deport_offer(
            &req,
            RejectionReason::StationsBusy,
            Some(&preferred),
            &[cand(1, 30.0)],
            &policy
        )
        .is_none());
        assert!(propose_deport_offer(
            &req,
            RejectionReason::NoStationInRange,
            None,
            &[],
            &OfferPolicy::default()
        )
        .is_none());
    }

    #[test]
    fn deport_in_time() {
        let req = request(1);
        let policy = OfferPolicy {
            in_space: false,
            delay_minutes: 10,
            time_discount: 0.5,
            ..OfferPolicy::default()
        };
        let preferred = cand(0, 6.0);
        let p = propose_deport_offer(&req, RejectionReason::StationsBusy, Some(&preferred), &[], &policy).unwrap();
        assert_eq!(
            p.offer,
            Offer {
                kind: OfferKind::DeportInTime,
                discount: 0.5,
                extra_minutes: 10.0
            }
        );
        assert_eq!(p.target.station, 0);
    }
}
