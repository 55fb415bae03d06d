//! Charging schedules for plugged-in sessions against a base load:
//! uncontrolled charging, valley filling, and V2G peak shaving.

use serde::{Deserialize, Serialize};

use crate::domain::{AgentId, MINUTES_PER_DAY};
use crate::error::{Error, Result};

/// Minimum price per MWh injected that makes owners take part in V2G.
pub const DEFAULT_PRICE_FLOOR: f64 = 4.12;
/// Discharge days allowed per vehicle per year.
pub const DEFAULT_ANNUAL_DISCHARGE_CAP: u32 = 20;

const ENERGY_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub enabled: bool,
    pub slot_minutes: u32,
    /// Ceiling on the total load in slots carrying EV charge, kW.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_limit_kw: Option<f64>,
    /// Peak-shaving threshold, kW. Defaults to the base-load peak.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_kw: Option<f64>,
    /// Price per MWh below which owners decline V2G.
    pub price_floor: f64,
    /// Price per MWh the aggregator pays for injected energy.
    pub offered_price: f64,
    pub annual_discharge_cap: u32,
    /// Cost per kWh discharged attributed to battery wear.
    pub degradation_cost: f64,
    /// Minimum state of charge a discharge may leave.
    pub min_soc: f64,
    /// Dwell time beyond the charging time, minutes.
    pub flex_minutes: u32,
    /// Quantum of the water-filling pass as a fraction of one slot at full power.
    pub quantum_fraction: f64,
    /// Hourly base-load profile over one day, kW. Interpolated to slots.
    pub base_load_kw: Vec<f64>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            slot_minutes: 30,
            grid_limit_kw: None,
            threshold_kw: None,
            price_floor: DEFAULT_PRICE_FLOOR,
            offered_price: 5.0,
            annual_discharge_cap: DEFAULT_ANNUAL_DISCHARGE_CAP,
            degradation_cost: 0.001,
            min_soc: 0.2,
            flex_minutes: 240,
            quantum_fraction: 0.1,
            base_load_kw: vec![
                550.0, 500.0, 480.0, 470.0, 480.0, 550.0, 700.0, 850.0, 900.0, 880.0, 850.0, 850.0, 850.0, 830.0,
                820.0, 850.0, 950.0, 1000.0, 1000.0, 950.0, 880.0, 800.0, 700.0, 600.0,
            ],
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_minutes == 0 || !MINUTES_PER_DAY.is_multiple_of(self.slot_minutes) {
            return Err(Error::config("scheduler.slot_minutes", "must divide 1440"));
        }
        if self.base_load_kw.len() != 24 {
            return Err(Error::config("scheduler.base_load_kw", "needs 24 hourly values"));
        }
        if self.base_load_kw.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(
                "scheduler.base_load_kw",
                "values must be finite and >= 0",
            ));
        }
        if let Some(t) = self.threshold_kw {
            if !(t > 0.0) {
                return Err(Error::config("scheduler.threshold_kw", "must be > 0"));
            }
        }
        if let Some(g) = self.grid_limit_kw {
            if !(g > 0.0) {
                return Err(Error::config("scheduler.grid_limit_kw", "must be > 0"));
            }
        }
        if !(0.0..1.0).contains(&self.min_soc) {
            return Err(Error::config("scheduler.min_soc", "must be in [0, 1)"));
        }
        if !(self.quantum_fraction > 0.0 && self.quantum_fraction <= 1.0) {
            return Err(Error::config("scheduler.quantum_fraction", "must be in (0, 1]"));
        }
        for (path, v) in [
            ("scheduler.price_floor", self.price_floor),
            ("scheduler.offered_price", self.offered_price),
            ("scheduler.degradation_cost", self.degradation_cost),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(path, "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn slots_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.slot_minutes) as usize
    }

    /// Base load for `days` consecutive days at slot resolution. Each slot
    /// takes the value of the hour it starts in.
    pub fn base_curve(&self, days: usize) -> LoadCurve {
        let per_day = self.slots_per_day();
        let values = (0..per_day * days)
            .map(|s| {
                let minute = (s % per_day) as u32 * self.slot_minutes;
                self.base_load_kw[(minute / 60) as usize]
            })
            .collect();
        LoadCurve {
            slot_minutes: self.slot_minutes,
            values,
        }
    }
}

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub agent_id: AgentId,
    /// First slot plugged in.
    pub plug_in: usize,
    /// First slot after unplugging.
    pub departure: usize,
    /// kWh
    pub energy_needed: f64,
    /// kW
    pub max_power: f64,
    pub v2g_capable: bool,
    pub soc: f64,
    pub desired_soc: f64,
    pub min_soc: f64,
    /// kWh
    pub battery_capacity: f64,
    pub discharges_used_this_year: u32,
    /// Cost per kWh discharged.
    pub degradation_cost: f64,
}

impl Session {
    fn validate(&self, slots: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(format!("session of agent {}: {m}", self.agent_id)));
        if self.plug_in >= self.departure || self.departure > slots {
            return bad("window must satisfy plug_in < departure <= slots");
        }
        if !(self.max_power > 0.0) || !(self.battery_capacity > 0.0) || !(self.energy_needed >= 0.0) {
            return bad("power and capacity must be > 0, energy >= 0");
        }
        if !(0.0..=1.0).contains(&self.soc) || self.min_soc > self.soc + 1e-12 || self.desired_soc > 1.0 {
            return bad("requires min_soc <= soc <= 1 and desired_soc <= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCurve {
    pub slot_minutes: u32,
    /// kW per slot
    pub values: Vec<f64>,
}

impl LoadCurve {
    pub fn new(slot_minutes: u32, values: Vec<f64>) -> Self {
        Self { slot_minutes, values }
    }

    pub fn flat(slot_minutes: u32, slots: usize, kw: f64) -> Self {
        Self::new(slot_minutes, vec![kw; slots])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot_hours(&self) -> f64 {
        f64::from(self.slot_minutes) / 60.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAssignment {
    pub agent_id: AgentId,
    /// kW per slot over the whole curve; negative values discharge.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignments: Vec<SessionAssignment>,
    /// Base plus EV load.
    pub total: LoadCurve,
    /// Sessions that discharged at least once.
    pub discharged: Vec<AgentId>,
    /// Slots still above the shaving threshold.
    pub unshaved_slots: Vec<usize>,
}

impl Schedule {
    pub fn charged_energy(&self, i: usize) -> f64 {
        let h = self.total.slot_hours();
        self.assignments[i].power.iter().filter(|p| **p > 0.0).sum::<f64>() * h
    }

    pub fn discharged_energy(&self) -> f64 {
        let h = self.total.slot_hours();
        self.assignments
            .iter()
            .flat_map(|a| a.power.iter())
            .filter(|p| **p < 0.0)
            .map(|p| -p * h)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadMetrics {
    pub peak: f64,
    pub variance: f64,
    pub energy: f64,
}

fn check_base(sessions: &[Session], base: &LoadCurve) -> Result<()> {
    if base.slot_minutes == 0 {
        return Err(Error::arg("slot length must be > 0"));
    }
    sessions.iter().try_for_each(|s| s.validate(base.len()))
}

fn total_of(base: &LoadCurve, assignments: &[SessionAssignment]) -> LoadCurve {
    let mut values = base.values.clone();
    for a in assignments {
        for (v, p) in values.iter_mut().zip(&a.power) {
            *v += p;
        }
    }
    LoadCurve::new(base.slot_minutes, values)
}

// ---------------------------------------------------------------------------
// Uncontrolled charging
// ---------------------------------------------------------------------------

fn asap(sessions: &[Session], base: &LoadCurve) -> (Vec<SessionAssignment>, Vec<AgentId>) {
    let h = base.slot_hours();
    let mut infeasible = Vec::new();
    let assignments = sessions
        .iter()
        .map(|s| {
            let mut power = vec![0.0; base.len()];
            let mut left = s.energy_needed;
            for p in power[s.plug_in..s.departure].iter_mut() {
                if left <= ENERGY_EPS {
                    break;
                }
                let e = left.min(s.max_power * h);
                *p = e / h;
                left -= e;
            }
            if left > 1e-6 {
                infeasible.push(s.agent_id);
            }
            SessionAssignment {
                agent_id: s.agent_id,
                power,
            }
        })
        .collect();
    (assignments, infeasible)
}

/// Every session charges at full power from plug-in until done. Returns the
/// total curve and the sessions that cannot finish before departure.
pub fn uncontrolled_load(sessions: &[Session], base: &LoadCurve) -> Result<(LoadCurve, Vec<AgentId>)> {
    check_base(sessions, base)?;
    let (a, infeasible) = asap(sessions, base);
    Ok((total_of(base, &a), infeasible))
}

/// Same as [`uncontrolled_load`] with the per-session assignments kept.
pub fn uncontrolled_schedule(sessions: &[Session], base: &LoadCurve) -> Result<Schedule> {
    check_base(sessions, base)?;
    let (assignments, _) = asap(sessions, base);
    Ok(Schedule {
        total: total_of(base, &assignments),
        assignments,
        discharged: Vec::new(),
        unshaved_slots: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Valley filling
// ---------------------------------------------------------------------------

/// Water level for one session: the power `clamp(level - other_t, 0, cap)`
/// summed over `window` equals `target` (kW·slots).
fn water_level(other: &[f64], cap: f64, target: f64) -> Vec<f64> {
    if target <= 0.0 {
        return vec![0.0; other.len()];
    }
    let mut points: Vec<f64> = other.iter().flat_map(|g| [*g, g + cap]).collect();
    points.sort_by(f64::total_cmp);
    let filled = |level: f64| -> f64 { other.iter().map(|g| (level - g).clamp(0.0, cap)).sum() };
    // find the segment [lo, hi] with filled(lo) <= target <= filled(hi)
    let mut lo = points[0];
    let mut level = *points.last().unwrap();
    for &p in &points {
        let f = filled(p);
        if f >= target {
            let flo = filled(lo);
            // filled is linear on [lo, p] with slope = number of active slots
            let active = other.iter().filter(|g| **g < p && **g + cap > lo).count() as f64;
            level = if active > 0.0 && p > lo {
                lo + (target - flo) / ((f - flo) / (p - lo))
            } else {
                p
            };
            break;
        }
        lo = p;
    }
    other.iter().map(|g| (level - g).clamp(0.0, cap)).collect()
}

/// Flattens the total load by placing each session's energy in the lowest
/// slots of its window.
///
/// A first pass hands out quanta of `quantum_fraction × max_power × slot` to
/// the lowest-load slot (ties: earlier slot, then smaller agent id). A second
/// pass refines to the exact optimum by repeated per-session water filling,
/// which minimises the sum of squared slot loads and with it the peak and the
/// variance. Slots whose base load already exceeds `grid_limit` receive no
/// charge; if the result still crosses the limit anywhere the schedule is
/// infeasible.
pub fn valley_fill(
    sessions: &[Session],
    base: &LoadCurve,
    grid_limit: Option<f64>,
    quantum_fraction: f64,
) -> Result<Schedule> {
    check_base(sessions, base)?;
    let n = base.len();
    let h = base.slot_hours();
    let allowed = |t: usize| grid_limit.is_none_or(|g| base.values[t] < g);

    for s in sessions {
        let usable = (s.plug_in..s.departure).filter(|&t| allowed(t)).count() as f64;
        if s.energy_needed > usable * s.max_power * h + 1e-6 {
            let slots: Vec<usize> = (s.plug_in..s.departure).filter(|&t| !allowed(t)).collect();
            return Err(Error::Infeasible {
                message: format!(
                    "session of agent {} cannot take {:.3} kWh in its window",
                    s.agent_id, s.energy_needed
                ),
                slots,
            });
        }
    }

    // order sessions by agent id for tie-breaking
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&i| (sessions[i].agent_id, i));

    let mut power = vec![vec![0.0; n]; sessions.len()];
    let mut load = base.values.clone();
    let mut left: Vec<f64> = sessions.iter().map(|s| s.energy_needed).collect();

    // pass 1: quanta to the lowest slot
    let mut by_slot: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in &order {
        let s = &sessions[i];
        for (t, slot) in by_slot.iter_mut().enumerate().take(s.departure).skip(s.plug_in) {
            if allowed(t) {
                slot.push(i);
            }
        }
    }
    let mut cursor = vec![0usize; n];
    loop {
        let mut pick: Option<(usize, usize)> = None;
        for t in 0..n {
            let list = &by_slot[t];
            while cursor[t] < list.len() {
                let i = list[cursor[t]];
                if left[i] > ENERGY_EPS && power[i][t] < sessions[i].max_power - ENERGY_EPS {
                    break;
                }
                cursor[t] += 1;
            }
            if cursor[t] < list.len() && pick.is_none_or(|(bt, _)| load[t] < load[bt]) {
                pick = Some((t, list[cursor[t]]));
            }
        }
        let Some((t, i)) = pick else { break };
        let s = &sessions[i];
        let quantum = quantum_fraction * s.max_power * h;
        let room = (s.max_power - power[i][t]) * h;
        let e = quantum.min(left[i]).min(room);
        power[i][t] += e / h;
        load[t] += e / h;
        left[i] -= e;
    }

    // pass 2: exact per-session water filling until nothing moves
    for _pass in 0..10_000 {
        let mut moved: f64 = 0.0;
        for &i in &order {
            let s = &sessions[i];
            let window: Vec<usize> = (s.plug_in..s.departure).filter(|&t| allowed(t)).collect();
            if window.is_empty() {
                continue;
            }
            let other: Vec<f64> = window.iter().map(|&t| load[t] - power[i][t]).collect();
            let fresh = water_level(&other, s.max_power, s.energy_needed / h);
            for (k, &t) in window.iter().enumerate() {
                moved = moved.max((fresh[k] - power[i][t]).abs());
                load[t] = other[k] + fresh[k];
                power[i][t] = fresh[k];
            }
        }
        if moved < 1e-10 {
            break;
        }
    }

    let assignments: Vec<SessionAssignment> = sessions
        .iter()
        .zip(power)
        .map(|(s, power)| SessionAssignment {
            agent_id: s.agent_id,
            power,
        })
        .collect();
    let total = total_of(base, &assignments);
    if let Some(g) = grid_limit {
        let ev: Vec<f64> = (0..n).map(|t| assignments.iter().map(|a| a.power[t]).sum()).collect();
        let binding: Vec<usize> = (0..n).filter(|&t| ev[t] > 1e-9 && total.values[t] > g + 1e-9).collect();
        if !binding.is_empty() {
            return Err(Error::Infeasible {
                message: format!("flattest schedule exceeds the grid limit of {g} kW"),
                slots: binding,
            });
        }
    }
    Ok(Schedule {
        assignments,
        total,
        discharged: Vec::new(),
        unshaved_slots: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// V2G
// ---------------------------------------------------------------------------

pub fn v2g_participation(offered_price: f64, floor: f64, session: &Session, annual_cap: u32) -> bool {
    offered_price >= floor && session.v2g_capable && session.discharges_used_this_year < annual_cap
}

/// Shaves slots above `threshold` by slowing or reversing the charging of
/// V2G-capable sessions, largest headroom first (ties by agent id).
///
/// Sessions charge as soon as possible toward their desired state of charge.
/// A session never drops below its minimum state of charge, and never so low
/// that full power in its remaining slots could not bring it back to the
/// desired level. Sessions at the annual discharge cap only charge.
pub fn peak_shave_v2g(sessions: &[Session], base: &LoadCurve, threshold: f64, annual_cap: u32) -> Result<Schedule> {
    check_base(sessions, base)?;
    if !(threshold > 0.0) {
        return Err(Error::arg("threshold must be > 0"));
    }
    let n = base.len();
    let h = base.slot_hours();
    let mut energy: Vec<f64> = sessions.iter().map(|s| s.soc * s.battery_capacity).collect();
    let desired: Vec<f64> = sessions
        .iter()
        .map(|s| s.desired_soc.min(1.0) * s.battery_capacity)
        .collect();
    let floor: Vec<f64> = sessions.iter().map(|s| s.min_soc * s.battery_capacity).collect();
    let mut power = vec![vec![0.0; n]; sessions.len()];
    let mut discharged = vec![false; sessions.len()];
    let mut unshaved = Vec::new();

    #[allow(clippy::needless_range_loop)] // t indexes the base curve and every session row
    for t in 0..n {
        let active: Vec<usize> = (0..sessions.len())
            .filter(|&i| sessions[i].plug_in <= t && t < sessions[i].departure)
            .collect();
        for &i in &active {
            let s = &sessions[i];
            power[i][t] = ((desired[i] - energy[i]) / h).clamp(0.0, s.max_power);
        }
        let mut excess = base.values[t] + active.iter().map(|&i| power[i][t]).sum::<f64>() - threshold;
        if excess > ENERGY_EPS {
            let mut shavers: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&i| sessions[i].v2g_capable && sessions[i].discharges_used_this_year < annual_cap)
                .collect();
            shavers.sort_by(|&a, &b| {
                let ha = energy[a] - floor[a];
                let hb = energy[b] - floor[b];
                hb.total_cmp(&ha).then(sessions[a].agent_id.cmp(&sessions[b].agent_id))
            });
            for i in shavers {
                if excess <= ENERGY_EPS {
                    break;
                }
                let s = &sessions[i];
                let after = (s.departure - t - 1) as f64;
                let p_min = (-s.max_power)
                    .max((floor[i] - energy[i]) / h)
                    .max((desired[i] - energy[i] - s.max_power * h * after) / h)
                    .min(power[i][t]);
                let p = (power[i][t] - excess).max(p_min);
                excess -= power[i][t] - p;
                power[i][t] = p;
                if p < -ENERGY_EPS {
                    discharged[i] = true;
                }
            }
            if excess > 1e-6 {
                unshaved.push(t);
            }
        }
        for &i in &active {
            energy[i] = (energy[i] + power[i][t] * h).clamp(floor[i].min(energy[i]), sessions[i].battery_capacity);
        }
    }

    let assignments: Vec<SessionAssignment> = sessions
        .iter()
        .zip(power)
        .map(|(s, power)| SessionAssignment {
            agent_id: s.agent_id,
            power,
        })
        .collect();
    Ok(Schedule {
        total: total_of(base, &assignments),
        assignments,
        discharged: sessions
            .iter()
            .zip(&discharged)
            .filter(|(_, d)| **d)
            .map(|(s, _)| s.agent_id)
            .collect(),
        unshaved_slots: unshaved,
    })
}

/// State of charge of session `i` at every slot boundary of `schedule`.
pub fn soc_trace(session: &Session, assignment: &SessionAssignment, slot_hours: f64) -> Vec<f64> {
    let mut soc = session.soc;
    let mut out = vec![soc];
    for p in &assignment.power[session.plug_in..session.departure] {
        soc += p * slot_hours / session.battery_capacity;
        out.push(soc);
    }
    out
}

pub fn load_metrics(curve: &LoadCurve) -> Result<LoadMetrics> {
    if curve.values.is_empty() {
        return Err(Error::arg("load curve is empty"));
    }
    let n = curve.values.len() as f64;
    let mean = curve.values.iter().sum::<f64>() / n;
    Ok(LoadMetrics {
        peak: curve.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        variance: curve.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n,
        energy: curve.values.iter().sum::<f64>() * curve.slot_hours(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn session(agent: AgentId, plug: usize, dep: usize, need: f64, p: f64) -> Session {
        Session {
            agent_id: agent,
            plug_in: plug,
            departure: dep,
            energy_needed: need,
            max_power: p,
            v2g_capable: false,
            soc: 0.5,
            desired_soc: 1.0,
            min_soc: 0.2,
            battery_capacity: 100.0,
            discharges_used_this_year: 0,
            degradation_cost: 0.0,
        }
    }

    #[test]
    fn uncontrolled_examples() {
        let base = LoadCurve::flat(60, 4, 0.0);
        let (c, inf) = uncontrolled_load(&[session(1, 0, 4, 7.0, 7.0)], &base).unwrap();
        assert_eq!(c.values, vec![7.0, 0.0, 0.0, 0.0]);
        assert!(inf.is_empty());
        let (c, _) = uncontrolled_load(&[session(1, 0, 4, 10.5, 7.0)], &base).unwrap();
        assert_eq!(c.values, vec![7.0, 3.5, 0.0, 0.0]);
        let (c, _) = uncontrolled_load(&[], &base).unwrap();
        assert_eq!(c, base);
        let (_, inf) = uncontrolled_load(&[session(9, 0, 1, 10.0, 7.0)], &base).unwrap();
        assert_eq!(inf, vec![9]);
    }

    #[test]
    fn valley_fill_examples() {
        let base = LoadCurve::new(60, vec![10.0, 2.0, 2.0, 10.0]);
        let s = valley_fill(&[session(1, 0, 4, 4.0, 4.0)], &base, None, 0.1).unwrap();
        for (got, want) in s.total.values.iter().zip([10.0, 4.0, 4.0, 10.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        let (unc, _) = uncontrolled_load(&[session(1, 0, 4, 4.0, 4.0)], &base).unwrap();
        assert_eq!(unc.values, vec![14.0, 2.0, 2.0, 10.0]);

        let base = LoadCurve::flat(60, 2, 5.0);
        let s = valley_fill(&[session(1, 0, 2, 2.0, 7.0)], &base, None, 0.1).unwrap();
        assert_abs_diff_eq!(s.assignments[0].power[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.assignments[0].power[1], 1.0, epsilon = 1e-9);

        let s = valley_fill(&[], &base, None, 0.1).unwrap();
        assert!(s.assignments.is_empty());
        assert_eq!(s.total, base);
    }

    #[test]
    fn refinement_fixes_quantum_greedy_peak() {
        // the quantum pass alone ends at [5, 15]; uncontrolled gives [10, 10]
        let base = LoadCurve::flat(60, 2, 0.0);
        let sessions = [session(1, 0, 2, 10.0, 10.0), session(2, 1, 2, 10.0, 10.0)];
        let s = valley_fill(&sessions, &base, None, 0.1).unwrap();
        assert_abs_diff_eq!(s.total.values[0], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.total.values[1], 10.0, epsilon = 1e-9);
    }

    #[test]
    fn grid_limit_reports_binding_slots() {
        let base = LoadCurve::flat(60, 2, 8.0);
        let err = valley_fill(&[session(1, 0, 2, 6.0, 7.0)], &base, Some(10.0), 0.1).unwrap_err();
        match err {
            Error::Infeasible { slots, .. } => assert_eq!(slots, vec![0, 1]),
            e => panic!("{e}"),
        }
        assert!(valley_fill(&[session(1, 0, 2, 4.0, 7.0)], &base, Some(10.0), 0.1).is_ok());
    }

    fn v2g(cap_used: u32) -> Session {
        Session {
            v2g_capable: true,
            soc: 0.8,
            desired_soc: 0.5,
            min_soc: 0.5,
            battery_capacity: 40.0,
            discharges_used_this_year: cap_used,
            ..session(1, 0, 2, 0.0, 5.0)
        }
    }

    #[test]
    fn peak_shave_example() {
        let base = LoadCurve::new(60, vec![10.0, 10.0]);
        let s = peak_shave_v2g(&[v2g(0)], &base, 8.0, 20).unwrap();
        assert_eq!(s.assignments[0].power, vec![-2.0, -2.0]);
        assert_eq!(s.total.values, vec![8.0, 8.0]);
        let trace = soc_trace(&v2g(0), &s.assignments[0], 1.0);
        assert_abs_diff_eq!(*trace.last().unwrap(), 0.7, epsilon = 1e-12);
        assert_eq!(s.discharged, vec![1]);
    }

    #[test]
    fn peak_shave_respects_cap_and_threshold() {
        let base = LoadCurve::new(60, vec![10.0, 10.0]);
        let s = peak_shave_v2g(&[v2g(20)], &base, 8.0, 20).unwrap();
        assert_eq!(s.assignments[0].power, vec![0.0, 0.0]);
        assert_eq!(s.unshaved_slots, vec![0, 1]);
        let low = LoadCurve::new(60, vec![1.0, 1.0]);
        let mut charging = v2g(0);
        charging.desired_soc = 0.9;
        let s = peak_shave_v2g(&[charging], &low, 8.0, 20).unwrap();
        assert_abs_diff_eq!(s.assignments[0].power[0], 4.0, epsilon = 1e-12);
        assert!(s.discharged.is_empty());
    }

    #[test]
    fn participation_floor() {
        let s = Session {
            discharges_used_this_year: 3,
            ..v2g(0)
        };
        assert!(v2g_participation(5.0, 4.12, &s, 20));
        assert!(!v2g_participation(4.0, 4.12, &s, 20));
        assert!(v2g_participation(4.12, 4.12, &s, 20));
        let plain = Session {
            v2g_capable: false,
            ..s.clone()
        };
        assert!(!v2g_participation(100.0, 4.12, &plain, 20));
        let used = Session {
            discharges_used_this_year: 20,
            ..s
        };
        assert!(!v2g_participation(100.0, 4.12, &used, 20));
    }

    #[test]
    fn metrics_examples() {
        let m = load_metrics(&LoadCurve::new(60, vec![1.0, 3.0])).unwrap();
        assert_eq!((m.peak, m.energy, m.variance), (3.0, 4.0, 1.0));
        assert_eq!(load_metrics(&LoadCurve::new(60, vec![5.0; 3])).unwrap().variance, 0.0);
        let z = load_metrics(&LoadCurve::new(60, vec![0.0])).unwrap();
        assert_eq!((z.peak, z.energy), (0.0, 0.0));
        assert!(load_metrics(&LoadCurve::new(60, vec![])).is_err());
    }

    #[test]
    fn water_level_hits_target() {
        let w = water_level(&[3.0, 1.0, 0.0, 5.0], 2.0, 4.5);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 4.5, epsilon = 1e-12);
        assert!(w.iter().all(|p| (0.0..=2.0).contains(p)));
    }
}
