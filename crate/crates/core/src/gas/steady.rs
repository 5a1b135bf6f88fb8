//! Steady-state nodal solver in squared pressures. Used as a reference for
//! the transient model; it shares no numerics with the time stepper.

use nalgebra::{DMatrix, DVector};

use super::{GasError, GasNetwork, ATMOSPHERIC_BAR, RENOUARD_EXPONENT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Largest accepted nodal mass imbalance (kg/s).
    pub tolerance_kg_per_s: f64,
    pub max_iterations: usize,
    /// Solutions with any pressure below this are reported as infeasible.
    pub floor_bar_abs: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { tolerance_kg_per_s: 1e-10, max_iterations: 500, floor_bar_abs: ATMOSPHERIC_BAR }
    }
}

/// Below this |Δπ| (bar²) the flow derivative is frozen at its value here.
const SLOPE_FLOOR: f64 = 1e-10;

fn flow_and_slope(k: f64, dpi: f64) -> (f64, f64) {
    let x = dpi.abs();
    let q = (x / k).powf(1.0 / RENOUARD_EXPONENT).copysign(dpi);
    let xs = x.max(SLOPE_FLOOR);
    let slope = (xs / k).powf(1.0 / RENOUARD_EXPONENT) / (RENOUARD_EXPONENT * xs);
    (q, slope)
}

/// Node pressures (bar abs, indexed like [`GasNetwork::nodes`]) at which every
/// node balances its withdrawals and injections (kg/s), the citygate
/// supplying the difference.
pub fn steady_state_solve(
    network: &GasNetwork,
    withdrawals_kg_per_s: &[f64],
    injections_kg_per_s: &[f64],
    options: &SteadyOptions,
) -> Result<Vec<f64>, GasError> {
    network.check_len(withdrawals_kg_per_s)?;
    network.check_len(injections_kg_per_s)?;
    let cg = network.citygate_index();
    let n = network.node_count();
    let source: Vec<f64> = (0..n).map(|i| if i == cg { 0.0 } else { injections_kg_per_s[i] - withdrawals_kg_per_s[i] }).collect();
    let net_demand = -source.iter().sum::<f64>();
    if net_demand < -options.tolerance_kg_per_s {
        return Err(GasError::Infeasible(format!(
            "injections exceed withdrawals by {:.3e} kg/s and the citygate cannot take gas back",
            -net_demand
        )));
    }

    let rho = network.properties.rho_std_kg_per_m3;
    let k: Vec<f64> = network.pipes.iter().map(|p| p.resistance(rho)).collect();
    let pcg = network.citygate_pressure_abs();
    let pi_cg = pcg * pcg;
    // Unknown index of each node; the citygate is fixed.
    let slot: Vec<Option<usize>> = (0..n)
        .scan(0usize, |next, i| {
            Some((i != cg).then(|| {
                *next += 1;
                *next - 1
            }))
        })
        .collect();
    let m = n - 1;

    let residual = |pi: &[f64]| -> (Vec<f64>, f64) {
        let mut f = source.clone();
        for (kk, &kp) in k.iter().enumerate() {
            let (i, j) = network.pipe_ends(kk);
            let (q, _) = flow_and_slope(kp, pi[i] - pi[j]);
            f[i] -= q;
            f[j] += q;
        }
        f[cg] = 0.0;
        let norm = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (f, norm)
    };

    // Linearised start: pipes behave as conductances sized for the total demand.
    let q_scale = net_demand.abs().max(source.iter().map(|s| s.abs()).sum::<f64>()).max(1e-3);
    let mut lap = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, s) in source.iter().enumerate() {
        if let Some(a) = slot[i] {
            rhs[a] = *s;
        }
    }
    for (kk, &kp) in k.iter().enumerate() {
        let g = 1.0 / (kp * q_scale.powf(RENOUARD_EXPONENT - 1.0));
        let (i, j) = network.pipe_ends(kk);
        stamp(&mut lap, &mut rhs, &slot, i, j, g, pi_cg);
    }
    let start = lap.lu().solve(&rhs).ok_or_else(|| GasError::Infeasible("singular network matrix".into()))?;
    let mut pi = vec![pi_cg; n];
    for i in 0..n {
        if let Some(a) = slot[i] {
            pi[i] = start[a];
        }
    }

    let (mut f, mut norm) = residual(&pi);
    let mut iterations = 0;
    while norm > options.tolerance_kg_per_s {
        if iterations == options.max_iterations {
            return Err(GasError::NotConverged { iterations, residual: norm });
        }
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for i in 0..n {
            if let Some(a) = slot[i] {
                b[a] = f[i];
            }
        }
        for (kk, &kp) in k.iter().enumerate() {
            let (i, j) = network.pipe_ends(kk);
            let (_, g) = flow_and_slope(kp, pi[i] - pi[j]);
            stamp(&mut jac, &mut DVector::zeros(m), &slot, i, j, g, 0.0);
        }
        // f = s − Σ outflows, so ∂f/∂π = −(weighted Laplacian); J·δ = −f ⇔ L·δ = f.
        let delta = jac.lu().solve(&b).ok_or(GasError::NotConverged { iterations, residual: norm })?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = (0..n).map(|i| slot[i].map_or(pi[i], |a| pi[i] + t * delta[a])).collect();
            let (ft, nt) = residual(&trial);
            if nt < norm || t < 1e-6 {
                pi = trial;
                f = ft;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
    }

    let floor2 = options.floor_bar_abs * options.floor_bar_abs;
    if let Some(i) = pi.iter().position(|v| *v < floor2) {
        return Err(GasError::Infeasible(format!(
            "node {} would need pressure below {:.3} bar abs",
            network.nodes()[i].id,
            options.floor_bar_abs
        )));
    }
    let pressures: Vec<f64> = pi.iter().map(|v| v.sqrt()).collect();
    for kk in 0..network.pipes.len() {
        let q = network.pipe_flow(kk, &pressures);
        let (i, j) = network.pipe_ends(kk);
        let raw =
            super::renouard_flow(pressures[i], pressures[j], network.pipes[kk].length_m, network.pipes[kk].diameter_mm, rho);
        if q != raw && raw.abs() > options.tolerance_kg_per_s {
            return Err(GasError::Infeasible("steady state needs gas to flow back into the citygate".into()));
        }
    }
    Ok(pressures)
}

/// Add conductance `g` between nodes i and j to a reduced Laplacian; a fixed
/// end at squared pressure `fixed` moves to the right-hand side.
fn stamp(mat: &mut DMatrix<f64>, rhs: &mut DVector<f64>, slot: &[Option<usize>], i: usize, j: usize, g: f64, fixed: f64) {
    match (slot[i], slot[j]) {
        (Some(a), Some(c)) => {
            mat[(a, a)] += g;
            mat[(c, c)] += g;
            mat[(a, c)] -= g;
            mat[(c, a)] -= g;
        }
        (Some(a), None) => {
            mat[(a, a)] += g;
            rhs[a] += g * fixed;
        }
        (None, Some(c)) => {
            mat[(c, c)] += g;
            rhs[c] += g * fixed;
        }
        (None, None) => {}
    }
}
