//! Time stepping of the nodal pressure equations.
//!
//! Each sub-step is implicit (backward Euler) in the mixed unknowns
//! (pipe flows, dynamic node pressures): the continuity equation is kept
//! linear in pressure so stored mass is conserved to solver precision, and
//! the stiffness of small nodes does not restrict the step. The pipe law is
//! `p_m² − p_n² = K·q·(q² + ε²)^0.41`, which equals Renouard's law away from
//! rest and keeps the Jacobian finite at zero flow.

use nalgebra::{DMatrix, DVector};

use super::{GasError, GasNetwork, GasState, RENOUARD_EXPONENT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Largest accepted pressure change at any node within one sub-step (bar).
    pub max_dp_bar: f64,
    pub min_substep_s: f64,
    /// First sub-step to try; `None` tries the whole interval.
    pub initial_substep_s: Option<f64>,
    /// Pressures above `p_max + margin` are treated as a failed integration.
    pub pressure_margin_bar: f64,
    /// Flow scale below which the pipe law is smoothed (kg/s).
    pub regularization_kg_per_s: f64,
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            max_dp_bar: 0.01,
            min_substep_s: 1.0,
            initial_substep_s: None,
            pressure_margin_bar: 1.0,
            regularization_kg_per_s: 1e-5,
            newton_tolerance: 1e-11,
            max_newton_iterations: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub state: GasState,
    pub substeps: usize,
    /// Mass delivered by the citygate over the whole interval (kg).
    pub citygate_mass_kg: f64,
    /// Length of the last accepted sub-step, a good first guess for the next call.
    pub last_substep_s: f64,
}

const HALF_EXPONENT: f64 = (RENOUARD_EXPONENT - 1.0) / 2.0;

struct Layout {
    /// Position of each node in the pressure unknowns; `None` for the citygate.
    dynamic: Vec<Option<usize>>,
    n_dynamic: usize,
    resistance: Vec<f64>,
    capacitance: Vec<f64>,
    /// +1 if the pipe leaves the citygate, −1 if it enters it, 0 otherwise.
    citygate_sign: Vec<f64>,
}

impl Layout {
    fn new(network: &GasNetwork) -> Self {
        let cg = network.citygate_index();
        let mut n_dynamic = 0;
        let dynamic = (0..network.node_count())
            .map(|i| {
                (i != cg).then(|| {
                    n_dynamic += 1;
                    n_dynamic - 1
                })
            })
            .collect();
        let rho = network.properties.rho_std_kg_per_m3;
        let capacitance = network.nodes().iter().map(|n| network.properties.capacitance(n.volume_m3)).collect();
        let citygate_sign = (0..network.pipes.len())
            .map(|k| {
                let (i, j) = network.pipe_ends(k);
                if i == cg {
                    1.0
                } else if j == cg {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            dynamic,
            n_dynamic,
            resistance: network.pipes.iter().map(|p| p.resistance(rho)).collect(),
            capacitance,
            citygate_sign,
        }
    }
}

fn pipe_law(k: f64, q: f64, eps2: f64) -> (f64, f64) {
    let s = q * q + eps2;
    let base = s.powf(HALF_EXPONENT);
    let h = k * q * base;
    let dh = k * (base + 2.0 * HALF_EXPONENT * q * q * base / s);
    (h, dh)
}

/// Advance `state` over `dt_s` seconds with piecewise-constant injections and
/// withdrawals (kg/s per node; entries at the citygate are ignored).
pub fn step(
    network: &GasNetwork,
    state: &GasState,
    injections_kg_per_s: &[f64],
    withdrawals_kg_per_s: &[f64],
    dt_s: f64,
    options: &StepOptions,
) -> Result<StepReport, GasError> {
    network.check_len(&state.pressures_bar_abs)?;
    network.check_len(injections_kg_per_s)?;
    network.check_len(withdrawals_kg_per_s)?;
    if !(dt_s > 0.0 && dt_s.is_finite()) {
        return Err(GasError::InvalidParameter(format!("time step must be positive, got {dt_s}")));
    }
    let layout = Layout::new(network);
    let source: Vec<f64> = injections_kg_per_s.iter().zip(withdrawals_kg_per_s).map(|(i, w)| i - w).collect();

    let mut pressures = state.pressures_bar_abs.clone();
    pressures[network.citygate_index()] = network.citygate_pressure_abs();
    let mut flows = state.pipe_flows_kg_per_s.clone();
    if flows.len() != network.pipes.len() {
        flows = vec![0.0; network.pipes.len()];
    }

    let mut elapsed = 0.0;
    let mut h = options.initial_substep_s.unwrap_or(dt_s).clamp(options.min_substep_s.min(dt_s), dt_s);
    let mut substeps = 0;
    let mut citygate_mass = 0.0;
    let mut last = h;
    while elapsed < dt_s {
        let remaining = dt_s - elapsed;
        // Avoid leaving a sliver shorter than the floor at the end.
        let mut trial = if remaining - h < options.min_substep_s { remaining } else { h };
        loop {
            let (p_new, q_new) =
                implicit_substep(network, &layout, &pressures, &flows, &source, trial, options).map_err(|e| match e {
                    GasError::PressureOutOfRange { node, pressure_bar, limit_bar, .. } => {
                        GasError::PressureOutOfRange { node, pressure_bar, limit_bar, elapsed_s: elapsed + trial }
                    }
                    other => other,
                })?;
            let dp = p_new.iter().zip(&pressures).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dp > options.max_dp_bar && trial > options.min_substep_s {
                trial = (trial * 0.9 * options.max_dp_bar / dp).max(options.min_substep_s);
                continue;
            }
            let outflow: f64 = q_new.iter().zip(&layout.citygate_sign).map(|(q, s)| q * s).sum();
            citygate_mass += outflow * trial;
            pressures = p_new;
            flows = q_new;
            elapsed = if trial >= remaining { dt_s } else { elapsed + trial };
            substeps += 1;
            last = trial;
            let growth = if dp > 0.0 { (0.9 * options.max_dp_bar / dp).min(2.0) } else { 2.0 };
            h = (trial * growth).clamp(options.min_substep_s, dt_s);
            break;
        }
    }

    let limit = network.p_max_abs() + options.pressure_margin_bar;
    if let Some((i, p)) = pressures.iter().enumerate().find(|(_, p)| !(**p > 0.0 && **p < limit)) {
        return Err(GasError::PressureOutOfRange {
            node: network.nodes()[i].id,
            pressure_bar: *p,
            limit_bar: limit,
            elapsed_s: dt_s,
        });
    }
    let citygate_flow = flows.iter().zip(&layout.citygate_sign).map(|(q, s)| q * s).sum::<f64>().max(0.0);
    Ok(StepReport {
        state: GasState { pressures_bar_abs: pressures, citygate_flow_kg_per_s: citygate_flow, pipe_flows_kg_per_s: flows },
        substeps,
        citygate_mass_kg: citygate_mass,
        last_substep_s: last,
    })
}

/// One backward-Euler sub-step, with the citygate check valve resolved by an
/// active-set loop around the Newton solve.
fn implicit_substep(
    network: &GasNetwork,
    layout: &Layout,
    p_old: &[f64],
    q_start: &[f64],
    source: &[f64],
    dt: f64,
    options: &StepOptions,
) -> Result<(Vec<f64>, Vec<f64>), GasError> {
    let cg = network.citygate_index();
    let p_cg = network.citygate_pressure_abs();
    let mut closed: Vec<bool> = (0..network.pipes.len())
        .map(|k| {
            let s = layout.citygate_sign[k];
            s != 0.0 && s * q_start[k] <= 0.0 && {
                let (i, j) = network.pipe_ends(k);
                let other = if i == cg { j } else { i };
                p_old[other] >= p_cg
            }
        })
        .collect();

    for _ in 0..=network.pipes.len() {
        let (p, q) = newton(network, layout, p_old, q_start, source, dt, &closed, options)?;
        let mut changed = false;
        for k in 0..network.pipes.len() {
            let s = layout.citygate_sign[k];
            if s == 0.0 {
                continue;
            }
            let (i, j) = network.pipe_ends(k);
            let other = if i == cg { j } else { i };
            if !closed[k] && s * q[k] < 0.0 {
                closed[k] = true;
                changed = true;
            } else if closed[k] && p[other] < p_cg {
                closed[k] = false;
                changed = true;
            }
        }
        if !changed {
            return Ok((p, q));
        }
    }
    Err(GasError::NotConverged { iterations: network.pipes.len() + 1, residual: f64::NAN })
}

#[allow(clippy::too_many_arguments)]
fn newton(
    network: &GasNetwork,
    layout: &Layout,
    p_old: &[f64],
    q_start: &[f64],
    source: &[f64],
    dt: f64,
    closed: &[bool],
    options: &StepOptions,
) -> Result<(Vec<f64>, Vec<f64>), GasError> {
    let n = layout.n_dynamic;
    let eps2 = options.regularization_kg_per_s * options.regularization_kg_per_s;
    let mut p = p_old.to_vec();
    let mut q: Vec<f64> = q_start.iter().zip(closed).map(|(q, c)| if *c { 0.0 } else { *q }).collect();
    let mut dh = vec![0.0; q.len()];
    let mut r = vec![0.0; q.len()];
    let limit = network.p_max_abs() + options.pressure_margin_bar;

    let mut residual = f64::INFINITY;
    for _ in 0..options.max_newton_iterations {
        let mut m = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (i, d) in layout.dynamic.iter().enumerate() {
            if let Some(a) = *d {
                let c = layout.capacitance[i] / dt;
                m[(a, a)] = c;
                b[a] = -(c * (p[i] - p_old[i]) - source[i]);
            }
        }
        for k in 0..q.len() {
            if closed[k] {
                continue;
            }
            let (i, j) = network.pipe_ends(k);
            let (h, d) = pipe_law(layout.resistance[k], q[k], eps2);
            dh[k] = d;
            r[k] = h - (p[i] * p[i] - p[j] * p[j]);
            // Continuity residual: flow leaves i and enters j.
            if let Some(a) = layout.dynamic[i] {
                b[a] -= q[k];
                b[a] += r[k] / d;
            }
            if let Some(c) = layout.dynamic[j] {
                b[c] += q[k];
                b[c] -= r[k] / d;
            }
            let gi = 2.0 * p[i] / d;
            let gj = 2.0 * p[j] / d;
            match (layout.dynamic[i], layout.dynamic[j]) {
                (Some(a), Some(c)) => {
                    m[(a, a)] += gi;
                    m[(a, c)] -= gj;
                    m[(c, a)] -= gi;
                    m[(c, c)] += gj;
                }
                (Some(a), None) => m[(a, a)] += gi,
                (None, Some(c)) => m[(c, c)] += gj,
                (None, None) => {}
            }
        }
        let dp = m.lu().solve(&b).ok_or(GasError::NotConverged { iterations: 0, residual: f64::NAN })?;

        let mut max_step = dp.amax();
        let scale = if max_step > 0.5 { 0.5 / max_step } else { 1.0 };
        let mut max_dq: f64 = 0.0;
        for k in 0..q.len() {
            if closed[k] {
                continue;
            }
            let (i, j) = network.pipe_ends(k);
            let dpi = layout.dynamic[i].map_or(0.0, |a| dp[a]);
            let dpj = layout.dynamic[j].map_or(0.0, |c| dp[c]);
            let dq = (-r[k] + 2.0 * p[i] * dpi - 2.0 * p[j] * dpj) / dh[k];
            max_dq = max_dq.max(dq.abs());
            q[k] += scale * dq;
        }
        for (i, d) in layout.dynamic.iter().enumerate() {
            if let Some(a) = *d {
                p[i] += scale * dp[a];
            }
        }
        max_step *= scale;
        residual = max_step.max(max_dq * scale);
        if let Some(i) = p.iter().position(|v| !(*v > 0.0 && *v < limit)) {
            return Err(GasError::PressureOutOfRange {
                node: network.nodes()[i].id,
                pressure_bar: p[i],
                limit_bar: limit,
                elapsed_s: f64::NAN,
            });
        }
        if scale == 1.0 && max_step < options.newton_tolerance && max_dq < options.newton_tolerance {
            return Ok((p, q));
        }
    }
    Err(GasError::NotConverged { iterations: options.max_newton_iterations, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{GasProperties, Pipe, PressureLimits};

    fn line(n: u32) -> GasNetwork {
        let pipes = (1..n).map(|i| Pipe { from: i, to: i + 1, length_m: 800.0, diameter_mm: 150.0 }).collect();
        GasNetwork::new(pipes, 1, GasProperties::default(), PressureLimits::default()).unwrap()
    }

    #[test]
    fn pipe_law_matches_renouard_away_from_rest() {
        let k = 3.0e3;
        let (h, _) = pipe_law(k, 0.3, 1e-10);
        assert!((h - k * 0.3f64.powf(1.82)).abs() / h < 1e-9);
        let (h0, d0) = pipe_law(k, 0.0, 1e-10);
        assert_eq!(h0, 0.0);
        assert!(d0 > 0.0 && d0.is_finite());
    }

    #[test]
    fn equilibrium_is_preserved() {
        let net = line(4);
        let state = GasState::uniform(&net, net.citygate_pressure_abs());
        let zero = vec![0.0; 4];
        let report = step(&net, &state, &zero, &zero, 900.0, &StepOptions::default()).unwrap();
        for p in &report.state.pressures_bar_abs {
            assert!((p - net.citygate_pressure_abs()).abs() < 1e-12);
        }
        assert!(report.citygate_mass_kg.abs() < 1e-9);
    }

    #[test]
    fn withdrawal_is_supplied_by_citygate() {
        let net = line(4);
        let mut state = GasState::uniform(&net, net.citygate_pressure_abs());
        let zero = vec![0.0; 4];
        let mut wd = vec![0.0; 4];
        wd[net.node_index(4).unwrap()] = 0.1;
        let mut supplied = 0.0;
        let m0 = net.stored_mass_kg(&state.pressures_bar_abs);
        for _ in 0..8 {
            let report = step(&net, &state, &zero, &wd, 900.0, &StepOptions::default()).unwrap();
            supplied += report.citygate_mass_kg;
            state = report.state;
        }
        let m1 = net.stored_mass_kg(&state.pressures_bar_abs);
        let balance = m1 - m0 - (supplied - 0.1 * 8.0 * 900.0);
        assert!(balance.abs() < 1e-6 * supplied, "{balance}");
        assert!((state.citygate_flow_kg_per_s - 0.1).abs() < 1e-3);
    }

    #[test]
    fn injection_on_closed_network_builds_linepack() {
        let net = line(3);
        let state = GasState::uniform(&net, net.citygate_pressure_abs());
        let mut inj = vec![0.0; 3];
        inj[net.node_index(3).unwrap()] = 0.02;
        let report = step(&net, &state, &inj, &[0.0; 3], 900.0, &StepOptions::default()).unwrap();
        let gained = net.stored_mass_kg(&report.state.pressures_bar_abs) - net.stored_mass_kg(&state.pressures_bar_abs);
        assert_eq!(report.citygate_mass_kg, 0.0);
        assert!((gained - 18.0).abs() < 1e-6 * 18.0, "{gained}");
        assert!(net.mean_pressure(&report.state.pressures_bar_abs) > net.citygate_pressure_abs());
        assert!(report.substeps > 1);
    }
}
