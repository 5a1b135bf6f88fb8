//! Transient gas model against the steady-state Newton solution under
//! constant boundary conditions.

use serde::Serialize;

use crate::gas::{steady_state_solve, step, GasError, GasNetwork, GasState, NodeId, SteadyOptions, StepOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub step_s: f64,
    pub max_steps: usize,
    /// Largest per-step pressure change (bar) accepted as stationary.
    pub stationary_bar: f64,
    pub transient: StepOptions,
    pub steady: SteadyOptions,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            step_s: 900.0,
            max_steps: 2000,
            stationary_bar: 1e-9,
            transient: StepOptions::default(),
            steady: SteadyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasValidation {
    /// Largest node-wise `|P_transient - P_steady| / P_steady` (absolute pressures).
    pub max_relative_error: f64,
    pub worst_node: NodeId,
    pub steps: usize,
    pub stationary: bool,
    pub transient_bar_abs: Vec<f64>,
    pub steady_bar_abs: Vec<f64>,
}

/// Run the transient model from a uniform citygate-pressure start until it
/// stops moving (or `max_steps` elapse) and compare with the steady solve.
pub fn validate_gas_model(
    network: &GasNetwork,
    withdrawals_kg_per_s: &[f64],
    injections_kg_per_s: &[f64],
    options: &ValidationOptions,
) -> Result<GasValidation, GasError> {
    let steady = steady_state_solve(network, withdrawals_kg_per_s, injections_kg_per_s, &options.steady)?;
    let mut state = GasState::uniform(network, network.citygate_pressure_abs());
    let mut steps = 0;
    let mut stationary = false;
    while steps < options.max_steps {
        let report = step(network, &state, injections_kg_per_s, withdrawals_kg_per_s, options.step_s, &options.transient)?;
        steps += 1;
        let change =
            report.state.pressures_bar_abs.iter().zip(&state.pressures_bar_abs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        state = report.state;
        if change < options.stationary_bar {
            stationary = true;
            break;
        }
    }
    let (worst, max_relative_error) = state
        .pressures_bar_abs
        .iter()
        .zip(&steady)
        .map(|(p, s)| (p - s).abs() / s)
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    Ok(GasValidation {
        max_relative_error,
        worst_node: network.nodes()[worst].id,
        steps,
        stationary,
        transient_bar_abs: state.pressures_bar_abs,
        steady_bar_abs: steady,
    })
}
