//! Discrete-event simulation of one scenario run.
//!
//! The event set is ordered by `(time, kind, agent, station, connector,
//! ticket)`, where kinds rank Release < Expiry < Reserve < Request. Every
//! tie is broken by integers, so a run is a pure function of the scenario
//! and the seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{
    accept_offer, build_population, stream, Agent, ChargeRequest, Geography, Offer, OfferKind, RequestGenerator,
    RequestKind,
};
use crate::domain::{AgentId, Minute, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::matching::{
    access_for, candidates, commit, commitment_fee, free_connector, greedy_one, propose_deport_offer, reserve_where,
    Allocation, Candidate, GreedyAttempt, MatchParams, PolicyMode, QueueEntry, Queues, RejectionReason,
    ReservationKind,
};
use crate::scenario::{scenario_hash, Scenario};
use crate::scheduler::{
    load_metrics, peak_shave_v2g, uncontrolled_load, v2g_participation, valley_fill, LoadCurve, LoadMetrics, Schedule,
    SchedulerConfig, Session,
};
use crate::supply::{connector_compatible, ConnectorEvent, ConnectorState, Network};

/// RNG stream for tender draws. Agent-keyed streams use lower tags.
const STREAM_TENDER: u64 = 3;

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub agent_id: AgentId,
    pub request_time: Minute,
    pub kind: RequestKind,
    pub station_id: String,
    pub borough_id: String,
    pub connector: usize,
    /// Connector power, kW.
    pub power_kw: f64,
    pub energy_kwh: f64,
    pub walk_minutes: f64,
    pub wait_minutes: f64,
    pub surcharge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offer: Option<Offer>,
    pub plug_in: Minute,
    pub release: Minute,
    pub battery_kwh: f64,
    pub v2g_capable: bool,
    /// State of charge at plug-in.
    pub soc: f64,
}

impl AllocationRecord {
    pub fn charge_minutes(&self) -> f64 {
        self.energy_kwh / self.power_kw * 60.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub agent_id: AgentId,
    pub request_time: Minute,
    pub reason: RejectionReason,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub enqueued: u64,
    pub served: u64,
    pub timed_out: u64,
    pub full: u64,
    /// Mean wait of agents served from a queue, minutes.
    pub mean_wait_minutes: f64,
    pub max_length: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfferStats {
    pub tendered: u64,
    pub accepted: u64,
    pub accepted_in_space: u64,
    pub accepted_in_time: u64,
    /// In-time offers whose station was busy again at the retry.
    pub retry_failed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReservationStats {
    pub attempted: u64,
    pub placed: u64,
    pub honoured: u64,
    pub lapsed: u64,
    pub fees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub day: u32,
    pub sessions: usize,
    pub uncontrolled: LoadMetrics,
    /// Absent when the grid limit cannot be met.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley_fill: Option<LoadMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valley_fill_error: Option<String>,
    pub v2g: LoadMetrics,
    pub threshold_kw: f64,
    pub discharging_sessions: usize,
    pub discharged_kwh: f64,
    pub unshaved_slots: usize,
    pub v2g_payment: f64,
    pub degradation_cost: f64,
    pub net_payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub policy: PolicyMode,
    pub horizon_days: u32,
    pub agents: u32,
    pub requests: u64,
    pub home_sessions: u64,
    pub home_energy_kwh: f64,
    pub delivered_energy_kwh: f64,
    pub allocations: Vec<AllocationRecord>,
    pub rejections: Vec<RejectionRecord>,
    pub rejections_by_reason: BTreeMap<String, u64>,
    pub queue: QueueStats,
    pub offers: OfferStats,
    pub reservations: ReservationStats,
    pub energy_per_borough_kwh: BTreeMap<String, f64>,
    /// Share of connector-minutes in use within the horizon.
    pub utilization_per_station: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedules: Vec<DaySummary>,
}

impl SimulationResult {
    pub fn mean_walk_minutes(&self) -> f64 {
        mean(self.allocations.iter().map(|a| a.walk_minutes))
    }

    pub fn mean_wait_minutes(&self) -> f64 {
        mean(self.allocations.iter().map(|a| a.wait_minutes))
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.requests == 0 {
            return 0.0;
        }
        self.allocations.len() as f64 / self.requests as f64
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

// ---------------------------------------------------------------------------
// Event loop
// ---------------------------------------------------------------------------

const RELEASE: u8 = 0;
const EXPIRY: u8 = 1;
const RESERVE: u8 = 2;
const REQUEST: u8 = 3;

/// (time, kind, agent, station, connector, ticket)
type Event = (Minute, u8, AgentId, usize, usize, usize);

#[derive(Debug)]
struct Ticket {
    req: ChargeRequest,
    done: bool,
    reservation: Option<(usize, usize)>,
    /// In-time offer accepted earlier; the retry targets this station.
    retry: Option<(Offer, Candidate)>,
    queued_at: Option<usize>,
}

struct Engine<'a> {
    scenario: &'a Scenario,
    params: MatchParams,
    network: Network,
    borough_of: Vec<String>,
    agents: Vec<Agent>,
    tickets: Vec<Ticket>,
    queues: Queues,
    heap: BinaryHeap<Reverse<Event>>,
    rng: ChaCha8Rng,
    allocations: Vec<AllocationRecord>,
    rejections: Vec<RejectionRecord>,
    queue: QueueStats,
    queue_wait_sum: f64,
    offers: OfferStats,
    reservations: ReservationStats,
}

/// Runs the scenario with `seed`.
pub fn run(scenario: &Scenario, seed: u64) -> Result<SimulationResult> {
    run_with_insertion_order(scenario, seed, None)
}

/// As [`run`], but first pushes the initial events in an order shuffled by
/// `shuffle`. Used to check that the event order alone decides the result.
#[doc(hidden)]
pub fn run_with_insertion_order(scenario: &Scenario, seed: u64, shuffle: Option<u64>) -> Result<SimulationResult> {
    scenario.validate()?;
    let region = scenario.region()?;
    let network = scenario.network(&region)?;
    let agents = build_population(scenario, seed)?;
    let (requests, ledger) = if agents.is_empty() {
        (Vec::new(), Default::default())
    } else {
        let geo = Geography::new(&region, Some(&network))?;
        RequestGenerator::new(&geo, &scenario.demand).generate_with_ledger(&agents, scenario.horizon_days, seed)
    };
    let borough_of = network
        .stations()
        .iter()
        .map(|s| s.location.borough_id.clone())
        .collect();
    let policy = &scenario.policy;
    let mut engine = Engine {
        scenario,
        params: scenario.match_params(),
        network,
        borough_of,
        agents,
        tickets: Vec::with_capacity(requests.len()),
        queues: Queues::new(policy.queue.patience_minutes, policy.queue.priority),
        heap: BinaryHeap::new(),
        rng: stream(seed, AgentId::MAX, STREAM_TENDER),
        allocations: Vec::new(),
        rejections: Vec::new(),
        queue: QueueStats::default(),
        queue_wait_sum: 0.0,
        offers: OfferStats::default(),
        reservations: ReservationStats::default(),
    };
    let mut initial = Vec::new();
    for (i, req) in requests.into_iter().enumerate() {
        initial.push((req.time, REQUEST, req.agent_id, 0, 0, i));
        if policy.mode == PolicyMode::GreedyReserve {
            let at = req.time.saturating_sub(policy.reservation.lead_minutes);
            initial.push((at, RESERVE, req.agent_id, 0, 0, i));
        }
        engine.tickets.push(Ticket {
            req,
            done: false,
            reservation: None,
            retry: None,
            queued_at: None,
        });
    }
    if let Some(k) = shuffle {
        initial.shuffle(&mut stream(k, AgentId::MAX, STREAM_TENDER + 1));
    }
    engine.heap.extend(initial.into_iter().map(Reverse));
    engine.drain()?;
    let mut result = engine.finish(scenario, seed);
    result.home_sessions = ledger.home_sessions;
    result.home_energy_kwh = ledger.home_energy;
    Ok(result)
}

/// Runs every seed, in parallel on `jobs` threads (0 picks a default).
/// Results come back in seed order.
pub fn run_many(scenario: &Scenario, seeds: &[u64], jobs: usize) -> Result<Vec<SimulationResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::arg(e.to_string()))?;
    pool.install(|| seeds.par_iter().map(|&s| run(scenario, s)).collect())
}

impl Engine<'_> {
    fn drain(&mut self) -> Result<()> {
        while let Some(Reverse((now, kind, _agent, station, connector, ticket))) = self.heap.pop() {
            match kind {
                RELEASE => self.on_release(now, station, connector)?,
                EXPIRY => self.on_expiry(ticket),
                RESERVE => self.on_reserve(now, ticket)?,
                _ => self.on_request(now, ticket)?,
            }
        }
        // hard entries nobody freed a connector for
        for t in 0..self.tickets.len() {
            if !self.tickets[t].done {
                if let Some(s) = self.tickets[t].queued_at {
                    let id = self.network.stations()[s].id.clone();
                    self.queues.remove_ticket(&id, t);
                }
                self.queue.timed_out += 1;
                self.reject(t, RejectionReason::QueueTimeout);
            }
        }
        Ok(())
    }

    fn reject(&mut self, t: usize, reason: RejectionReason) {
        let tk = &mut self.tickets[t];
        tk.done = true;
        self.rejections.push(RejectionRecord {
            agent_id: tk.req.agent_id,
            request_time: tk.req.time,
            reason,
            energy_kwh: tk.req.energy_needed,
        });
    }

    fn record(&mut self, t: usize, a: Allocation, station: usize, now: Minute) {
        self.tickets[t].done = true;
        let st = &self.network.stations()[station];
        let power = st.connectors[a.connector].socket.power;
        let minutes = (a.request.energy_needed / power * 60.0).ceil().max(1.0) as Minute;
        let release = now + minutes;
        self.heap
            .push(Reverse((release, RELEASE, a.request.agent_id, station, a.connector, t)));
        let agent = &self.agents[a.request.agent_id as usize];
        self.allocations.push(AllocationRecord {
            agent_id: a.request.agent_id,
            request_time: a.request.time,
            kind: a.request.kind,
            station_id: a.station_id,
            borough_id: self.borough_of[station].clone(),
            connector: a.connector,
            power_kw: power,
            energy_kwh: a.request.energy_needed,
            walk_minutes: a.walk_minutes,
            wait_minutes: a.wait_minutes,
            surcharge: a.surcharge,
            offer: a.applied_offer,
            plug_in: now,
            release,
            battery_kwh: agent.vehicle.battery_capacity,
            v2g_capable: agent.vehicle.v2g_capable,
            soc: a.request.soc,
        });
    }

    fn on_release(&mut self, now: Minute, station: usize, connector: usize) -> Result<()> {
        let st = &mut self.network.stations_mut()[station];
        st.connectors[connector].apply(ConnectorEvent::Release)?;
        if self.scenario.policy.mode != PolicyMode::GreedyQueue {
            return Ok(());
        }
        let id = st.id.clone();
        let c = st.connectors[connector].clone();
        let tickets = &self.tickets;
        let Some(entry) = self
            .queues
            .pop_first_where(&id, now, |e| connector_compatible(&tickets[e.ticket].req, &c))
        else {
            return Ok(());
        };
        let t = entry.ticket;
        let req = self.tickets[t].req.clone();
        let st = &self.network.stations()[station];
        let access = access_for(&req.subscriptions, st, self.params.roaming);
        let walk = crate::domain::walk_time(&req.destination, &st.location, self.params.walk_speed_kmh)?;
        let cand = Candidate {
            station,
            station_id: id,
            walk_minutes: walk,
            surcharge: access.surcharge,
        };
        let wait = f64::from(now - req.time);
        let a = commit(&mut self.network, &req, &cand, connector, wait, None)?;
        self.queue.served += 1;
        self.queue_wait_sum += f64::from(now - entry.enqueue_time);
        self.record(t, a, station, now);
        Ok(())
    }

    fn on_expiry(&mut self, t: usize) {
        if self.tickets[t].done {
            return;
        }
        if let Some(s) = self.tickets[t].queued_at {
            let id = self.network.stations()[s].id.clone();
            self.queues.remove_ticket(&id, t);
        }
        self.queue.timed_out += 1;
        self.reject(t, RejectionReason::QueueTimeout);
    }

    fn on_reserve(&mut self, now: Minute, t: usize) -> Result<()> {
        let policy = &self.scenario.policy.reservation;
        let req = self.tickets[t].req.clone();
        self.reservations.attempted += 1;
        let hold = req.time - now + policy.grace_minutes;
        for cand in candidates(&req, &self.network, &self.params, req.max_walk) {
            if !self.network.stations()[cand.station].services.reservable {
                continue;
            }
            let placed = reserve_where(
                &mut self.network,
                &cand.station_id,
                req.agent_id,
                policy.kind,
                now,
                hold,
                policy,
                |c| connector_compatible(&req, c),
            );
            if let Ok(r) = placed {
                self.reservations.placed += 1;
                self.reservations.fees += r.fee;
                self.tickets[t].reservation = Some((cand.station, r.connector));
                break;
            }
        }
        Ok(())
    }

    fn on_request(&mut self, now: Minute, t: usize) -> Result<()> {
        let req = self.tickets[t].req.clone();
        self.agents[req.agent_id as usize].roll_offer_period(now);

        if let Some((offer, cand)) = self.tickets[t].retry.take() {
            let st = &mut self.network.stations_mut()[cand.station];
            st.expire_reservations(now);
            if let Some(idx) = free_connector(&req, st) {
                let wait = f64::from(now - req.time);
                let a = commit(&mut self.network, &req, &cand, idx, wait, Some(offer))?;
                self.record(t, a, cand.station, now);
                return Ok(());
            }
            self.offers.retry_failed += 1;
            let in_range = candidates(&req, &self.network, &self.params, req.max_walk);
            return self.after_failure(now, t, RejectionReason::StationsBusy, in_range, false);
        }

        if let Some((s, c)) = self.tickets[t].reservation.take() {
            let conn = &mut self.network.stations_mut()[s].connectors[c];
            match conn.state {
                ConnectorState::Reserved { holder, expiry } if holder == req.agent_id && expiry > now => {
                    let st = &self.network.stations()[s];
                    let access = access_for(&req.subscriptions, st, self.params.roaming);
                    let cand = Candidate {
                        station: s,
                        station_id: st.id.clone(),
                        walk_minutes: crate::domain::walk_time(
                            &req.destination,
                            &st.location,
                            self.params.walk_speed_kmh,
                        )?,
                        surcharge: access.surcharge,
                    };
                    let a = commit(&mut self.network, &req, &cand, c, 0.0, None)?;
                    self.reservations.honoured += 1;
                    self.record(t, a, s, now);
                    return Ok(());
                }
                ConnectorState::Reserved { holder, .. } if holder == req.agent_id => {
                    conn.apply(ConnectorEvent::Release)?;
                    self.reservations.lapsed += 1;
                }
                _ => self.reservations.lapsed += 1,
            }
        }

        match greedy_one(&req, &mut self.network, now, &self.params)? {
            GreedyAttempt::Allocated(a) => {
                let s = self.network.position(&a.station_id).expect("allocated station exists");
                self.record(t, a, s, now);
                Ok(())
            }
            GreedyAttempt::Failed { reason, in_range } => self.after_failure(now, t, reason, in_range, true),
        }
    }

    /// Offers, then queueing, then rejection.
    fn after_failure(
        &mut self,
        now: Minute,
        t: usize,
        reason: RejectionReason,
        in_range: Vec<Candidate>,
        may_offer: bool,
    ) -> Result<()> {
        let policy = &self.scenario.policy;
        let req = self.tickets[t].req.clone();
        if may_offer && policy.offers.enabled && self.rng.gen::<f64>() < policy.offers.tender_probability {
            let limit = req.max_walk + policy.offers.extra_minutes;
            let alternatives: Vec<Candidate> = candidates(&req, &self.network, &self.params, limit)
                .into_iter()
                .filter(|c| {
                    let st = &self.network.stations()[c.station];
                    st.connectors.iter().any(|k| {
                        connector_compatible(&req, k)
                            && (k.is_free()
                                || matches!(k.state, ConnectorState::Reserved { holder, expiry }
                                    if holder == req.agent_id || expiry <= now))
                    })
                })
                .collect();
            if let Some(p) = propose_deport_offer(&req, reason, in_range.first(), &alternatives, &policy.offers) {
                self.offers.tendered += 1;
                let agent = &mut self.agents[req.agent_id as usize];
                if accept_offer(agent, &p.offer) {
                    self.offers.accepted += 1;
                    match p.offer.kind {
                        OfferKind::DeportInSpace => {
                            self.offers.accepted_in_space += 1;
                            let st = &mut self.network.stations_mut()[p.target.station];
                            st.expire_reservations(now);
                            let idx = free_connector(&req, st).expect("alternative has a free connector");
                            let a = commit(&mut self.network, &req, &p.target, idx, 0.0, Some(p.offer))?;
                            self.record(t, a, p.target.station, now);
                        }
                        OfferKind::DeportInTime => {
                            self.offers.accepted_in_time += 1;
                            let at = now + policy.offers.delay_minutes;
                            self.tickets[t].retry = Some((p.offer, p.target));
                            self.heap.push(Reverse((at, REQUEST, req.agent_id, 0, 0, t)));
                        }
                    }
                    return Ok(());
                }
            }
        }

        if policy.mode == PolicyMode::GreedyQueue && reason == RejectionReason::StationsBusy {
            let target = &in_range[0];
            let st = &self.network.stations()[target.station];
            let id = st.id.clone();
            if self.queues.len(&id) >= policy.queue.max_length {
                self.queue.full += 1;
                self.reject(t, RejectionReason::QueueFull);
                return Ok(());
            }
            let on_site = self.queues.hard_len(&id) < st.services.reserved_ev_parking as usize;
            let (kind, expiry, fee) = if on_site {
                let power = st
                    .connectors
                    .iter()
                    .filter(|c| connector_compatible(&req, c))
                    .map(|c| c.socket.power)
                    .fold(0.0, f64::max);
                let fee = commitment_fee(
                    st.services.charge_rate,
                    power,
                    60,
                    policy.reservation.fee_cap_multiplier,
                );
                (ReservationKind::Hard, None, fee)
            } else {
                (ReservationKind::Soft, Some(now + policy.queue.patience_minutes), 0.0)
            };
            let agent = &self.agents[req.agent_id as usize];
            self.queues.push(QueueEntry {
                station_id: id.clone(),
                agent_id: req.agent_id,
                enqueue_time: now,
                kind,
                expiry,
                committed_fee: fee,
                priority: agent.preference.wants_priority,
                ticket: t,
            });
            if let Some(x) = expiry {
                self.heap.push(Reverse((x, EXPIRY, req.agent_id, target.station, 0, t)));
            }
            self.tickets[t].queued_at = Some(target.station);
            self.queue.enqueued += 1;
            let len = self.queues.len(&id);
            let m = self.queue.max_length.entry(id).or_insert(0);
            *m = (*m).max(len);
            return Ok(());
        }
        self.reject(t, reason);
        Ok(())
    }

    fn finish(mut self, scenario: &Scenario, seed: u64) -> SimulationResult {
        self.allocations.sort_by_key(|a| (a.plug_in, a.agent_id, a.request_time));
        self.rejections.sort_by_key(|r| (r.request_time, r.agent_id));
        let mut by_reason = BTreeMap::new();
        for r in &self.rejections {
            *by_reason.entry(r.reason.as_str().to_string()).or_insert(0) += 1;
        }
        let horizon = scenario.horizon_days * MINUTES_PER_DAY;
        let mut energy = BTreeMap::new();
        let mut busy: BTreeMap<String, f64> = BTreeMap::new();
        for a in &self.allocations {
            *energy.entry(a.borough_id.clone()).or_insert(0.0) += a.energy_kwh;
            let used = a.release.min(horizon).saturating_sub(a.plug_in.min(horizon));
            *busy.entry(a.station_id.clone()).or_insert(0.0) += f64::from(used);
        }
        let utilization = self
            .network
            .stations()
            .iter()
            .map(|s| {
                let cap = s.connectors.len() as f64 * f64::from(horizon);
                let u = busy.get(&s.id).copied().unwrap_or(0.0);
                (s.id.clone(), if cap > 0.0 { u / cap } else { 0.0 })
            })
            .collect();
        let mut queue = self.queue;
        if queue.served > 0 {
            queue.mean_wait_minutes = self.queue_wait_sum / queue.served as f64;
        }
        let schedules = if scenario.scheduler.enabled {
            plan_days(&scenario.scheduler, &self.allocations, scenario.horizon_days)
                .into_iter()
                .map(|d| d.summary)
                .collect()
        } else {
            Vec::new()
        };
        SimulationResult {
            scenario: scenario.name.clone(),
            scenario_hash: scenario_hash(scenario),
            seed,
            policy: scenario.policy.mode,
            horizon_days: scenario.horizon_days,
            agents: self.agents.len() as u32,
            requests: self.tickets.len() as u64,
            home_sessions: 0,
            home_energy_kwh: 0.0,
            delivered_energy_kwh: self.allocations.iter().map(|a| a.energy_kwh).sum(),
            allocations: self.allocations,
            rejections: self.rejections,
            rejections_by_reason: by_reason,
            queue,
            offers: self.offers,
            reservations: self.reservations,
            energy_per_borough_kwh: energy,
            utilization_per_station: utilization,
            schedules,
        }
    }
}

// ---------------------------------------------------------------------------
// Post-processing
// ---------------------------------------------------------------------------

/// Connector occupancy of every allocation, minutes.
pub fn session_durations(result: &SimulationResult) -> Vec<f64> {
    result
        .allocations
        .iter()
        .map(AllocationRecord::charge_minutes)
        .collect()
}

/// Counts per bin of width `bin_minutes`, keyed by bin start.
pub fn duration_histogram(durations: &[f64], bin_minutes: u32) -> BTreeMap<u32, usize> {
    let w = f64::from(bin_minutes.max(1));
    let mut out = BTreeMap::new();
    for d in durations {
        let bin = ((d / w).floor() as u32) * bin_minutes.max(1);
        *out.entry(bin).or_insert(0) += 1;
    }
    out
}

/// Everything computed for one day of smart charging.
#[derive(Debug, Clone)]
pub struct DayPlan {
    pub sessions: Vec<Session>,
    pub base: LoadCurve,
    pub uncontrolled: LoadCurve,
    pub valley: Result<Schedule>,
    pub v2g: Schedule,
    pub summary: DaySummary,
}

/// Turns the allocations that plug in on `day` into scheduler sessions. The
/// window opens at the plug-in slot and closes `flex_minutes` after the
/// uncontrolled charge would end. `discharges` carries annual V2G use.
pub fn sessions_for_day(
    cfg: &SchedulerConfig,
    allocations: &[AllocationRecord],
    day: u32,
    discharges: &BTreeMap<AgentId, u32>,
) -> Vec<Session> {
    let start = day * MINUTES_PER_DAY;
    let slot = f64::from(cfg.slot_minutes);
    allocations
        .iter()
        .filter(|a| a.plug_in / MINUTES_PER_DAY == day)
        .map(|a| {
            let offset = f64::from(a.plug_in - start);
            let plug = (offset / slot).floor() as usize;
            let end = offset + a.charge_minutes() + f64::from(cfg.flex_minutes);
            let departure = ((end / slot).ceil() as usize).max(plug + 1);
            let used = discharges.get(&a.agent_id).copied().unwrap_or(0);
            let mut s = Session {
                agent_id: a.agent_id,
                plug_in: plug,
                departure,
                energy_needed: a.energy_kwh,
                max_power: a.power_kw,
                v2g_capable: a.v2g_capable,
                soc: a.soc,
                desired_soc: (a.soc + a.energy_kwh / a.battery_kwh).min(1.0),
                min_soc: cfg.min_soc.min(a.soc),
                battery_capacity: a.battery_kwh,
                discharges_used_this_year: used,
                degradation_cost: cfg.degradation_cost,
            };
            s.v2g_capable = v2g_participation(cfg.offered_price, cfg.price_floor, &s, cfg.annual_discharge_cap);
            s
        })
        .collect()
}

fn plan_day(cfg: &SchedulerConfig, sessions: Vec<Session>, day: u32) -> DayPlan {
    let per_day = cfg.slots_per_day();
    let last = sessions.iter().map(|s| s.departure).max().unwrap_or(0);
    let days = last.div_ceil(per_day).max(2);
    let base = cfg.base_curve(days);
    let (uncontrolled, _) = uncontrolled_load(&sessions, &base).expect("sessions fit the window");
    let valley = valley_fill(&sessions, &base, cfg.grid_limit_kw, cfg.quantum_fraction);
    let threshold = cfg
        .threshold_kw
        .unwrap_or_else(|| base.values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let v2g = peak_shave_v2g(&sessions, &base, threshold, cfg.annual_discharge_cap).expect("sessions fit the window");
    let metric = |c: &LoadCurve| load_metrics(c).expect("non-empty curve");
    let discharged_kwh = v2g.discharged_energy();
    let price_per_kwh = cfg.offered_price / 1000.0;
    let degradation: f64 = sessions
        .iter()
        .zip(&v2g.assignments)
        .map(|(s, a)| {
            let out: f64 = a.power.iter().filter(|p| **p < 0.0).map(|p| -p).sum::<f64>() * base.slot_hours();
            out * s.degradation_cost
        })
        .sum();
    let payment = discharged_kwh * price_per_kwh;
    let summary = DaySummary {
        day,
        sessions: sessions.len(),
        uncontrolled: metric(&uncontrolled),
        valley_fill: valley.as_ref().ok().map(|s| metric(&s.total)),
        valley_fill_error: valley.as_ref().err().map(|e| e.to_string()),
        v2g: metric(&v2g.total),
        threshold_kw: threshold,
        discharging_sessions: v2g.discharged.len(),
        discharged_kwh,
        unshaved_slots: v2g.unshaved_slots.len(),
        v2g_payment: payment,
        degradation_cost: degradation,
        net_payment: payment - degradation,
    };
    DayPlan {
        sessions,
        base,
        uncontrolled,
        valley,
        v2g,
        summary,
    }
}

/// Plans every day of the horizon in order, carrying the annual discharge
/// count from one day to the next.
pub fn plan_days(cfg: &SchedulerConfig, allocations: &[AllocationRecord], horizon_days: u32) -> Vec<DayPlan> {
    let mut discharges = BTreeMap::new();
    let mut out = Vec::new();
    for day in 0..horizon_days {
        let sessions = sessions_for_day(cfg, allocations, day, &discharges);
        let plan = plan_day(cfg, sessions, day);
        // one cycle per agent and day, however many sessions discharged
        let agents: std::collections::BTreeSet<AgentId> = plan.v2g.discharged.iter().copied().collect();
        for a in agents {
            *discharges.entry(a).or_insert(0) += 1;
        }
        out.push(plan);
    }
    out
}

/// The plan of a single day, with discharge counts replayed from the days
/// before it.
pub fn plan_for_day(cfg: &SchedulerConfig, result: &SimulationResult, day: u32) -> Result<DayPlan> {
    if day >= result.horizon_days {
        return Err(Error::arg(format!(
            "day {day} is outside the {}-day horizon",
            result.horizon_days
        )));
    }
    Ok(plan_days(cfg, &result.allocations, day + 1)
        .pop()
        .expect("at least one day"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(agent: AgentId, energy: f64, power: f64) -> AllocationRecord {
        AllocationRecord {
            agent_id: agent,
            request_time: 0,
            kind: RequestKind::Threshold,
            station_id: "S".into(),
            borough_id: "B".into(),
            connector: 0,
            power_kw: power,
            energy_kwh: energy,
            walk_minutes: 0.0,
            wait_minutes: 0.0,
            surcharge: 0.0,
            offer: None,
            plug_in: 0,
            release: 60,
            battery_kwh: 40.0,
            v2g_capable: false,
            soc: 0.5,
        }
    }

    #[test]
    fn durations_follow_energy_over_power() {
        let mut r = run(&Scenario::minimal(0), 1).unwrap();
        r.allocations = vec![record(0, 7.0, 7.0), record(1, 25.0, 50.0), record(2, 22.0, 22.0)];
        let d = session_durations(&r);
        assert_eq!(d, vec![60.0, 30.0, 60.0]);
        let h = duration_histogram(&d, 30);
        assert_eq!(h.get(&60), Some(&2));
        assert_eq!(h.get(&30), Some(&1));
    }

    #[test]
    fn empty_population_runs() {
        let r = run(&Scenario::minimal(0), 3).unwrap();
        assert_eq!(r.requests, 0);
        assert!(r.allocations.is_empty());
        assert_eq!(r.seed, 3);
    }

    #[test]
    fn sessions_cover_their_charge() {
        let cfg = SchedulerConfig::default();
        let mut a = record(4, 14.0, 7.0);
        a.plug_in = 1440 + 75;
        let s = sessions_for_day(&cfg, &[a], 1, &BTreeMap::new());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].plug_in, 2);
        // 75 + 120 + 240 minutes, rounded up to whole slots
        assert_eq!(s[0].departure, 15);
        assert!((s[0].departure - s[0].plug_in) as f64 * 0.5 * 7.0 >= 14.0);
    }
}
