//! Rule-based coordination of the P2G plants: electrolyzers follow the RES
//! surplus of their own feeder, methanation units share the SNG mass the gas
//! network can take this step.

use serde::Serialize;

use crate::plant::{ramp_band, MethPhase, PlantConfig, PlantState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetpointDecision {
    pub setpoint_kw: f64,
    /// Feeder surplus still unabsorbed when this plant was served.
    pub surplus_share_kw: f64,
}

/// Electrolyzer setpoints. Plants sharing a feeder are served in index
/// order, each from what the previous ones left.
///
/// `feeder_of[i]` is the feeder index of plant i; `surplus_kw[f]` the RES
/// surplus of feeder f. The tank headroom assumes methanation keeps its
/// current load.
pub fn electrolyzer_setpoints(
    plants: &[PlantConfig],
    states: &[PlantState],
    feeder_of: &[usize],
    surplus_kw: &[f64],
    dt_h: f64,
) -> Vec<SetpointDecision> {
    let draw: Vec<f64> = states
        .iter()
        .map(|s| match s.meth.phase {
            MethPhase::UpAndRunning => s.meth.load_kg_per_h,
            _ => 0.0,
        })
        .collect();
    setpoints_with_draw(plants, states, feeder_of, surplus_kw, &draw, dt_h)
}

/// Setpoints given the hydrogen each methanation unit takes this step (kg/h).
fn setpoints_with_draw(
    plants: &[PlantConfig],
    states: &[PlantState],
    feeder_of: &[usize],
    surplus_kw: &[f64],
    meth_draw_kg_per_h: &[f64],
    dt_h: f64,
) -> Vec<SetpointDecision> {
    let mut remaining = surplus_kw.to_vec();
    plants
        .iter()
        .zip(states)
        .zip(feeder_of)
        .zip(meth_draw_kg_per_h)
        .map(|(((cfg, state), &f), &draw)| {
            let el = &cfg.electrolyzer;
            let share = remaining[f].max(0.0);
            let setpoint = if share <= 0.0 {
                el.standby_power_kw
            } else {
                let headroom = (cfg.buffer.max_mass() - state.buffer.stored_mass_kg).max(0.0);
                let tank_limited = el.power_for_rate(headroom / dt_h + draw);
                let sp = (share + el.standby_power_kw).min(el.nominal_power_kw).min(tank_limited);
                if sp < el.min_producing_kw() {
                    el.standby_power_kw
                } else {
                    sp
                }
            };
            remaining[f] = (remaining[f] - setpoint).max(0.0);
            SetpointDecision { setpoint_kw: setpoint, surplus_share_kw: share }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchRole {
    /// Producing or about to produce this step.
    Running,
    /// In reactor balancing with steps left; no production this step.
    Balancing,
    /// Hot standby with the tank above the start-up threshold.
    StartCandidate,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantDispatch {
    pub role: DispatchRole,
    pub h2_target_kg_per_h: f64,
    /// Load the plant would take with an unlimited budget.
    pub requested_kg_per_h: f64,
    /// Load the plant will actually run at this step.
    pub planned_load_kg_per_h: f64,
    pub curtailed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinatorDirective {
    pub setpoints: Vec<SetpointDecision>,
    pub plants: Vec<PlantDispatch>,
    pub budget_kg: f64,
    /// Planned SNG mass this step.
    pub budget_used_kg: f64,
    /// Production ramp-down inertia forces regardless of the budget.
    pub forced_kg: f64,
    pub budget_binding: bool,
}

impl CoordinatorDirective {
    pub fn targets(&self) -> Vec<f64> {
        self.plants.iter().map(|p| p.h2_target_kg_per_h).collect()
    }

    pub fn plants_curtailed(&self) -> usize {
        self.plants.iter().filter(|p| p.curtailed).count()
    }
}

/// Largest load in `[lo, hi]` the tank can sustain now and while ramping
/// down to zero afterwards without dropping below p_min.
pub fn sustainable_load(cfg: &PlantConfig, state: &PlantState, lo: f64, hi: f64, dt_h: f64) -> f64 {
    let available = (state.buffer.stored_mass_kg - cfg.buffer.min_mass()).max(0.0);
    let step_down = cfg.methanation.ramp_down_kg_per_h * dt_h;
    let draw = |load: f64| {
        let mut total = load;
        let mut l = load - step_down;
        while l > 0.0 {
            total += l;
            l -= step_down;
        }
        total * dt_h
    };
    if draw(hi) <= available {
        return hi;
    }
    if draw(lo) >= available {
        return lo;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if draw(m) <= available {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Methanation targets under the SNG budget (kg this step).
///
/// Running units first receive their unavoidable ramp-down production, then
/// the rest of the budget is filled in priority order: most stored hydrogen
/// first, ties by plant index. A unit that gets nothing above its floor is
/// shed (target 0). Units in hot standby start only when every running unit
/// is at its largest feasible load and the budget still covers a first
/// production step.
pub fn methanation_dispatch(plants: &[PlantConfig], states: &[PlantState], budget_kg: f64, dt_h: f64) -> Vec<PlantDispatch> {
    dispatch_with_budget(plants, states, budget_kg.max(0.0), dt_h).0
}

fn dispatch_with_budget(
    plants: &[PlantConfig],
    states: &[PlantState],
    budget_kg: f64,
    dt_h: f64,
) -> (Vec<PlantDispatch>, f64, f64) {
    struct Candidate {
        role: DispatchRole,
        lo: f64,
        max: f64,
        kg_sng_per_load: f64,
    }
    let candidates: Vec<Candidate> = plants
        .iter()
        .zip(states)
        .map(|(cfg, st)| {
            let m = &cfg.methanation;
            let kg_sng_per_load = dt_h * m.ch4_yield_kg_per_kg_h2;
            let (role, load) = match st.meth.phase {
                MethPhase::UpAndRunning => (DispatchRole::Running, st.meth.load_kg_per_h),
                MethPhase::ReactorBalancing { remaining_steps: 0 } => (DispatchRole::Running, 0.0),
                MethPhase::ReactorBalancing { .. } => (DispatchRole::Balancing, 0.0),
                MethPhase::HotStandby if st.buffer_pressure(cfg) >= cfg.buffer.meth_trigger_bar => {
                    (DispatchRole::StartCandidate, 0.0)
                }
                MethPhase::HotStandby => (DispatchRole::Idle, 0.0),
            };
            let (lo, max) = if role == DispatchRole::Running {
                let (lo, hi) = ramp_band(m, load, dt_h);
                (lo, sustainable_load(cfg, st, lo, hi, dt_h))
            } else {
                (0.0, 0.0)
            };
            Candidate { role, lo, max, kg_sng_per_load }
        })
        .collect();

    let mut order: Vec<usize> = (0..plants.len()).collect();
    order.sort_by(|&a, &b| states[b].buffer.stored_mass_kg.total_cmp(&states[a].buffer.stored_mass_kg).then(a.cmp(&b)));

    let forced: f64 = candidates.iter().map(|c| c.lo * c.kg_sng_per_load).sum();
    let mut remaining = budget_kg - forced;
    let mut load: Vec<f64> = candidates.iter().map(|c| c.lo).collect();
    let mut out: Vec<PlantDispatch> = candidates
        .iter()
        .map(|c| PlantDispatch {
            role: c.role,
            h2_target_kg_per_h: 0.0,
            requested_kg_per_h: c.max,
            planned_load_kg_per_h: c.lo,
            curtailed: false,
        })
        .collect();

    let mut all_running_full = true;
    for &i in &order {
        let c = &candidates[i];
        if c.role != DispatchRole::Running {
            continue;
        }
        let wanted = c.max - c.lo;
        let extra = if wanted <= 0.0 { 0.0 } else { wanted.min((remaining / c.kg_sng_per_load).max(0.0)) };
        remaining -= extra * c.kg_sng_per_load;
        load[i] += extra;
        let full = extra >= wanted;
        all_running_full &= full;
        out[i].curtailed = !full;
        out[i].planned_load_kg_per_h = load[i];
        out[i].h2_target_kg_per_h = if extra > 0.0 || (full && c.max > 0.0) { load[i] } else { 0.0 };
    }

    for &i in &order {
        let cfg = &plants[i];
        match candidates[i].role {
            DispatchRole::Balancing => out[i].h2_target_kg_per_h = cfg.methanation.nominal_h2_intake_kg_per_h,
            DispatchRole::StartCandidate => {
                let m = &cfg.methanation;
                // Production of the first running step after balancing.
                let first = m.ramp_up_kg_per_h.min(m.nominal_h2_intake_kg_per_h / dt_h) * dt_h * candidates[i].kg_sng_per_load;
                out[i].requested_kg_per_h = m.nominal_h2_intake_kg_per_h;
                if all_running_full && remaining >= first {
                    remaining -= first;
                    out[i].h2_target_kg_per_h = m.nominal_h2_intake_kg_per_h;
                } else {
                    out[i].curtailed = true;
                }
            }
            _ => {}
        }
    }
    (out, forced, remaining)
}

/// Full coordination step: electrolyzer setpoints and methanation targets.
pub fn coordinate(
    plants: &[PlantConfig],
    states: &[PlantState],
    feeder_of: &[usize],
    surplus_kw: &[f64],
    budget_kg: f64,
    dt_h: f64,
) -> CoordinatorDirective {
    let budget = budget_kg.max(0.0);
    let (dispatch, forced, _) = dispatch_with_budget(plants, states, budget, dt_h);
    let draw: Vec<f64> = dispatch.iter().map(|d| d.planned_load_kg_per_h).collect();
    let setpoints = setpoints_with_draw(plants, states, feeder_of, surplus_kw, &draw, dt_h);
    let used: f64 =
        dispatch.iter().zip(plants).map(|(d, cfg)| d.planned_load_kg_per_h * dt_h * cfg.methanation.ch4_yield_kg_per_kg_h2).sum();
    let binding = dispatch.iter().any(|d| d.curtailed);
    CoordinatorDirective {
        setpoints,
        plants: dispatch,
        budget_kg: budget,
        budget_used_kg: used,
        forced_kg: forced,
        budget_binding: binding,
    }
}
