use num_complex::Complex64;
use serde::Serialize;

use super::{ElectricalNetwork, PowerFlowError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    /// Convergence threshold on the largest per-iteration voltage change (pu).
    pub tolerance_pu: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self { tolerance_pu: 1e-8, max_iterations: 100 }
    }
}

/// Solved operating point. Branch quantities are indexed like
/// [`ElectricalNetwork::branches`] and oriented parent → child; bus
/// quantities are indexed by internal bus index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElectricalState {
    pub voltages: Vec<Complex64>,
    pub branch_current_pu: Vec<Complex64>,
    /// Complex power leaving the parent end of each branch.
    pub branch_flow_pu: Vec<Complex64>,
    /// Complex power delivered by each transformer into its feeder (import positive).
    pub transformer_power_pu: Vec<Complex64>,
    pub feeder_losses_pu: Vec<f64>,
    pub iterations: usize,
}

impl ElectricalState {
    pub fn voltage_magnitude(&self, bus_index: usize) -> f64 {
        self.voltages[bus_index].norm()
    }
}

/// Backward-Forward Sweep on a radial forest.
///
/// `injections` are complex powers in pu, positive for generation. The
/// backward pass accumulates branch currents from the leaves, the forward
/// pass drops voltages from each transformer root. Constant-power buses.
pub fn bfs_power_flow(
    network: &ElectricalNetwork,
    injections: &[Complex64],
    options: &PowerFlowOptions,
) -> Result<ElectricalState, PowerFlowError> {
    let n = network.bus_count();
    if injections.len() != n {
        return Err(PowerFlowError::InjectionLength { expected: n, found: injections.len() });
    }
    if let Some(i) = injections.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(PowerFlowError::NonFinite(network.buses()[i].id));
    }

    let buses = network.buses();
    let order = network.order();
    let slack = Complex64::new(network.slack_voltage_pu, 0.0);
    let mut v = vec![slack; n];
    let mut downstream = vec![Complex64::new(0.0, 0.0); n];
    let mut branch_current = vec![Complex64::new(0.0, 0.0); network.branches.len()];

    let backward = |v: &[Complex64], downstream: &mut [Complex64], branch_current: &mut [Complex64]| {
        // Current drawn by each bus and its subtree, flowing away from the root.
        for (k, s) in injections.iter().enumerate() {
            downstream[k] = -(s / v[k]).conj();
        }
        for &k in order.iter().rev() {
            if let Some((p, b)) = buses[k].parent {
                branch_current[b] = downstream[k];
                let d = downstream[k];
                downstream[p] += d;
            }
        }
    };

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while iterations < options.max_iterations {
        iterations += 1;
        backward(&v, &mut downstream, &mut branch_current);
        last_change = 0.0;
        for &k in order {
            if let Some((p, b)) = buses[k].parent {
                let updated = v[p] - network.branches[b].impedance() * branch_current[b];
                last_change = f64::max(last_change, (updated - v[k]).norm());
                v[k] = updated;
            }
        }
        if last_change < options.tolerance_pu {
            break;
        }
    }
    if !(last_change < options.tolerance_pu) {
        return Err(PowerFlowError::NotConverged { iterations, last_change });
    }
    // Currents consistent with the reported voltages.
    backward(&v, &mut downstream, &mut branch_current);

    let mut branch_flow = vec![Complex64::new(0.0, 0.0); network.branches.len()];
    let mut feeder_losses = vec![0.0; network.transformers.len()];
    for bus in buses {
        if let Some((p, b)) = bus.parent {
            let i = branch_current[b];
            branch_flow[b] = v[p] * i.conj();
            feeder_losses[bus.feeder] += network.branches[b].r_pu * i.norm_sqr();
        }
    }
    let transformer_power = (0..network.transformers.len())
        .map(|f| {
            let r = network.root_index(f);
            v[r] * downstream[r].conj()
        })
        .collect();

    Ok(ElectricalState {
        voltages: v,
        branch_current_pu: branch_current,
        branch_flow_pu: branch_flow,
        transformer_power_pu: transformer_power,
        feeder_losses_pu: feeder_losses,
        iterations,
    })
}
