//! Isothermal medium-pressure gas distribution network.
//!
//! Pressures are absolute bar throughout; gauge limits are converted with
//! [`ATMOSPHERIC_BAR`]. Pipe flows follow Renouard's medium-pressure law and
//! each node stores gas in half the volume of its incident pipes. The
//! citygate node is a fixed-pressure boundary that can only feed the network.

mod steady;
mod transient;

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use steady::{steady_state_solve, SteadyOptions};
pub use transient::{step, StepOptions, StepReport};

pub type NodeId = u32;

pub const ATMOSPHERIC_BAR: f64 = 1.01325;
pub const RENOUARD_CONSTANT: f64 = 25.24;
pub const RENOUARD_EXPONENT: f64 = 1.82;
pub const DIAMETER_EXPONENT: f64 = -4.82;
/// |p_m² − p_n²| below which a pipe is considered at rest (bar²).
pub const DEAD_BAND_BAR2: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("pipe {from}-{to}: {reason}")]
    InvalidPipe { from: NodeId, to: NodeId, reason: String },
    #[error("node {0} has no incident pipe")]
    IsolatedNode(NodeId),
    #[error("gas network is not connected: node {0} cannot be reached from the citygate")]
    Disconnected(NodeId),
    #[error("citygate node {0} does not appear in the pipe list")]
    MissingCitygate(NodeId),
    #[error("invalid gas parameter: {0}")]
    InvalidParameter(String),
    #[error("vector of length {found} where {expected} nodes were expected")]
    LengthMismatch { expected: usize, found: usize },
    #[error("integration failure at node {node}: pressure {pressure_bar:.4} bar abs outside (0, {limit_bar:.4}) after {elapsed_s:.1} s")]
    PressureOutOfRange { node: NodeId, pressure_bar: f64, limit_bar: f64, elapsed_s: f64 },
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("demand cannot be met: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub from: NodeId,
    pub to: NodeId,
    pub length_m: f64,
    pub diameter_mm: f64,
}

impl Pipe {
    pub fn volume_m3(&self) -> f64 {
        let r = self.diameter_mm / 2000.0;
        PI * r * r * self.length_m
    }

    /// Coefficient `K` of `p_m² − p_n² = K · |q|^1.82` with q in kg/s.
    pub fn resistance(&self, rho_std: f64) -> f64 {
        RENOUARD_CONSTANT * self.length_m * self.diameter_mm.powf(DIAMETER_EXPONENT) * (3600.0 / rho_std).powf(RENOUARD_EXPONENT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasProperties {
    pub rho_std_kg_per_m3: f64,
    pub r_gas_j_per_kgk: f64,
    pub temperature_k: f64,
}

impl Default for GasProperties {
    fn default() -> Self {
        Self { rho_std_kg_per_m3: 0.78, r_gas_j_per_kgk: 518.0, temperature_k: 288.0 }
    }
}

impl GasProperties {
    /// Mass stored per bar of pressure in `volume_m3` (kg/bar).
    pub fn capacitance(&self, volume_m3: f64) -> f64 {
        volume_m3 * 1e5 / (self.r_gas_j_per_kgk * self.temperature_k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PressureLimits {
    pub citygate_pressure_barg: f64,
    pub p_min_barg: f64,
    pub p_max_barg: f64,
}

impl Default for PressureLimits {
    fn default() -> Self {
        Self { citygate_pressure_barg: 4.0, p_min_barg: 1.5, p_max_barg: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Citygate,
    Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasNode {
    pub id: NodeId,
    pub volume_m3: f64,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasNetwork {
    pub pipes: Vec<Pipe>,
    pub properties: GasProperties,
    pub limits: PressureLimits,
    nodes: Vec<GasNode>,
    index: HashMap<NodeId, usize>,
    citygate: usize,
    /// (from index, to index) per pipe.
    ends: Vec<(usize, usize)>,
}

impl GasNetwork {
    pub fn new(pipes: Vec<Pipe>, citygate: NodeId, properties: GasProperties, limits: PressureLimits) -> Result<Self, GasError> {
        for (name, v) in [
            ("rho_std_kg_per_m3", properties.rho_std_kg_per_m3),
            ("r_gas_j_per_kgk", properties.r_gas_j_per_kgk),
            ("temperature_k", properties.temperature_k),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GasError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(limits.p_min_barg < limits.p_max_barg)
            || limits.citygate_pressure_barg > limits.p_max_barg
            || limits.p_min_barg + ATMOSPHERIC_BAR <= 0.0
        {
            return Err(GasError::InvalidParameter(format!(
                "pressure band min {} / citygate {} / max {} barg is inconsistent",
                limits.p_min_barg, limits.citygate_pressure_barg, limits.p_max_barg
            )));
        }

        let mut index = HashMap::new();
        let mut ids = Vec::new();
        let mut ends = Vec::with_capacity(pipes.len());
        for p in &pipes {
            if !(p.length_m > 0.0 && p.length_m.is_finite()) {
                return Err(GasError::InvalidPipe { from: p.from, to: p.to, reason: format!("length {} m", p.length_m) });
            }
            if !(p.diameter_mm > 0.0 && p.diameter_mm.is_finite()) {
                return Err(GasError::InvalidPipe { from: p.from, to: p.to, reason: format!("diameter {} mm", p.diameter_mm) });
            }
            if p.from == p.to {
                return Err(GasError::InvalidPipe { from: p.from, to: p.to, reason: "self loop".into() });
            }
            let mut intern = |id| {
                *index.entry(id).or_insert_with(|| {
                    ids.push(id);
                    ids.len() - 1
                })
            };
            ends.push((intern(p.from), intern(p.to)));
        }
        let cg = *index.get(&citygate).ok_or(GasError::MissingCitygate(citygate))?;

        let mut volumes = vec![0.0; ids.len()];
        let mut adjacency = vec![Vec::new(); ids.len()];
        for (p, &(i, j)) in pipes.iter().zip(&ends) {
            volumes[i] += 0.5 * p.volume_m3();
            volumes[j] += 0.5 * p.volume_m3();
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut seen = vec![false; ids.len()];
        seen[cg] = true;
        let mut queue = VecDeque::from([cg]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(GasError::Disconnected(ids[i]));
        }

        let nodes = ids
            .iter()
            .zip(volumes)
            .enumerate()
            .map(|(i, (&id, volume_m3))| GasNode {
                id,
                volume_m3,
                role: if i == cg { NodeRole::Citygate } else { NodeRole::Distribution },
            })
            .collect();
        Ok(Self { pipes, properties, limits, nodes, index, citygate: cg, ends })
    }

    pub fn nodes(&self) -> &[GasNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn citygate_index(&self) -> usize {
        self.citygate
    }

    pub fn citygate_id(&self) -> NodeId {
        self.nodes[self.citygate].id
    }

    pub fn pipe_ends(&self, k: usize) -> (usize, usize) {
        self.ends[k]
    }

    pub fn citygate_pressure_abs(&self) -> f64 {
        self.limits.citygate_pressure_barg + ATMOSPHERIC_BAR
    }

    pub fn p_max_abs(&self) -> f64 {
        self.limits.p_max_barg + ATMOSPHERIC_BAR
    }

    pub fn p_min_abs(&self) -> f64 {
        self.limits.p_min_barg + ATMOSPHERIC_BAR
    }

    /// Total volume of the nodes whose pressure evolves (all but the citygate).
    pub fn dynamic_volume_m3(&self) -> f64 {
        self.nodes.iter().enumerate().filter(|(i, _)| *i != self.citygate).map(|(_, n)| n.volume_m3).sum()
    }

    /// Gas mass held in the dynamic nodes (kg).
    pub fn stored_mass_kg(&self, pressures_bar_abs: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(pressures_bar_abs)
            .enumerate()
            .filter(|(i, _)| *i != self.citygate)
            .map(|(_, (n, p))| self.properties.capacitance(n.volume_m3) * p)
            .sum()
    }

    /// Volume-weighted mean pressure over the dynamic nodes.
    pub fn mean_pressure(&self, pressures_bar_abs: &[f64]) -> f64 {
        let v = self.dynamic_volume_m3();
        if v == 0.0 {
            return pressures_bar_abs[self.citygate];
        }
        let weighted: f64 = self
            .nodes
            .iter()
            .zip(pressures_bar_abs)
            .enumerate()
            .filter(|(i, _)| *i != self.citygate)
            .map(|(_, (n, p))| n.volume_m3 * p)
            .sum();
        weighted / v
    }

    /// Renouard flow of pipe `k` under the given pressures, honouring the
    /// citygate check valve.
    pub fn pipe_flow(&self, k: usize, pressures_bar_abs: &[f64]) -> f64 {
        let (i, j) = self.ends[k];
        let p = &self.pipes[k];
        let q = renouard_flow(
            pressures_bar_abs[i],
            pressures_bar_abs[j],
            p.length_m,
            p.diameter_mm,
            self.properties.rho_std_kg_per_m3,
        );
        self.check_valve(k, q)
    }

    /// Zero a flow that would push gas back into the citygate.
    pub(crate) fn check_valve(&self, k: usize, q: f64) -> f64 {
        let (i, j) = self.ends[k];
        if (i == self.citygate && q < 0.0) || (j == self.citygate && q > 0.0) {
            0.0
        } else {
            q
        }
    }

    /// Net gas leaving the citygate into the network (kg/s), ≥ 0.
    pub fn citygate_outflow(&self, pipe_flows: &[f64]) -> f64 {
        self.ends
            .iter()
            .zip(pipe_flows)
            .map(|(&(i, j), q)| {
                if i == self.citygate {
                    *q
                } else if j == self.citygate {
                    -*q
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn check_len(&self, v: &[f64]) -> Result<(), GasError> {
        if v.len() != self.nodes.len() {
            return Err(GasError::LengthMismatch { expected: self.nodes.len(), found: v.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub pressures_bar_abs: Vec<f64>,
    pub citygate_flow_kg_per_s: f64,
    pub pipe_flows_kg_per_s: Vec<f64>,
}

impl GasState {
    /// Every node at `pressure_bar_abs` (the citygate at its set-point).
    pub fn uniform(network: &GasNetwork, pressure_bar_abs: f64) -> Self {
        let mut pressures = vec![pressure_bar_abs; network.node_count()];
        pressures[network.citygate_index()] = network.citygate_pressure_abs();
        Self::from_pressures(network, pressures)
    }

    pub fn from_pressures(network: &GasNetwork, pressures_bar_abs: Vec<f64>) -> Self {
        let flows: Vec<f64> = (0..network.pipes.len()).map(|k| network.pipe_flow(k, &pressures_bar_abs)).collect();
        Self { citygate_flow_kg_per_s: network.citygate_outflow(&flows), pipe_flows_kg_per_s: flows, pressures_bar_abs }
    }

    pub fn min_pressure(&self) -> f64 {
        self.pressures_bar_abs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_pressure(&self) -> f64 {
        self.pressures_bar_abs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Renouard medium-pressure flow (kg/s), positive from m to n.
pub fn renouard_flow(p_m_bar: f64, p_n_bar: f64, length_m: f64, diameter_mm: f64, rho_std: f64) -> f64 {
    let dp2 = p_m_bar * p_m_bar - p_n_bar * p_n_bar;
    if dp2.abs() < DEAD_BAND_BAR2 {
        return 0.0;
    }
    let k = RENOUARD_CONSTANT * length_m * diameter_mm.powf(DIAMETER_EXPONENT);
    let standard_m3_per_h = (dp2.abs() / k).powf(1.0 / RENOUARD_EXPONENT);
    (standard_m3_per_h * rho_std / 3600.0).copysign(dp2)
}

/// Half the summed volume of the incident pipes.
pub fn node_volume(node: NodeId, incident_pipes: &[&Pipe]) -> Result<f64, GasError> {
    if incident_pipes.is_empty() {
        return Err(GasError::IsolatedNode(node));
    }
    Ok(0.5 * incident_pipes.iter().map(|p| p.volume_m3()).sum::<f64>())
}

/// dP/dt (bar/s) for every node; zero at the citygate.
pub fn pressure_rhs(
    network: &GasNetwork,
    state: &GasState,
    injections_kg_per_s: &[f64],
    withdrawals_kg_per_s: &[f64],
) -> Result<Vec<f64>, GasError> {
    network.check_len(&state.pressures_bar_abs)?;
    network.check_len(injections_kg_per_s)?;
    network.check_len(withdrawals_kg_per_s)?;
    let mut net = vec![0.0; network.node_count()];
    for (i, (inj, wd)) in injections_kg_per_s.iter().zip(withdrawals_kg_per_s).enumerate() {
        net[i] = inj - wd;
    }
    for k in 0..network.pipes.len() {
        let q = network.pipe_flow(k, &state.pressures_bar_abs);
        let (i, j) = network.pipe_ends(k);
        net[i] -= q;
        net[j] += q;
    }
    let rt = network.properties.r_gas_j_per_kgk * network.properties.temperature_k;
    Ok(network
        .nodes()
        .iter()
        .zip(net)
        .enumerate()
        .map(|(i, (node, m))| if i == network.citygate_index() { 0.0 } else { 1e-5 * rt / node.volume_m3 * m })
        .collect())
}

/// SNG mass (kg) the network can take this timestep: what is withdrawn plus
/// the linepack headroom between the mean pressure and the upper limit.
pub fn max_sng_injectable(network: &GasNetwork, state: &GasState, withdrawals_kg_per_s: &[f64], dt_s: f64) -> f64 {
    let withdrawn: f64 =
        withdrawals_kg_per_s.iter().enumerate().filter(|(i, _)| *i != network.citygate_index()).map(|(_, w)| w).sum::<f64>()
            * dt_s;
    let headroom = (network.p_max_abs() - network.mean_pressure(&state.pressures_bar_abs))
        * network.properties.capacitance(network.dynamic_volume_m3());
    (withdrawn + headroom).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipe(from: NodeId, to: NodeId, length_m: f64, diameter_mm: f64) -> Pipe {
        Pipe { from, to, length_m, diameter_mm }
    }

    #[test]
    fn renouard_golden_value() {
        let q = renouard_flow(5.0, 4.8, 1000.0, 100.0, 0.78);
        assert!((q - 0.236_780_124_844_980_7).abs() < 1e-12, "{q}");
        assert_eq!(renouard_flow(4.8, 5.0, 1000.0, 100.0, 0.78), -q);
        assert_eq!(renouard_flow(4.2, 4.2, 1000.0, 100.0, 0.78), 0.0);
    }

    #[test]
    fn resistance_reproduces_renouard() {
        let p = pipe(1, 2, 1000.0, 100.0);
        let q = renouard_flow(5.0, 4.8, p.length_m, p.diameter_mm, 0.78);
        let k = p.resistance(0.78);
        assert!((k * q.powf(RENOUARD_EXPONENT) - (25.0 - 23.04)).abs() < 1e-10);
    }

    #[test]
    fn node_volume_is_half_of_incident_pipes() {
        let a = pipe(1, 2, 1000.0, 200.0);
        let v = node_volume(1, &[&a]).unwrap();
        assert!((v - 15.707_963_267_948_966).abs() < 1e-12);
        assert!((node_volume(1, &[&a, &a]).unwrap() - 2.0 * v).abs() < 1e-12);
        assert!(node_volume(1, &[&pipe(1, 2, 1000.0, 1e-9)]).unwrap() < 1e-20);
        assert_eq!(node_volume(7, &[]), Err(GasError::IsolatedNode(7)));
    }

    /// Citygate 1 feeding a single node 2 whose volume is exactly 50 m³.
    fn single_node_network() -> GasNetwork {
        let d = 200.0;
        let length = 100.0 / (PI * (d / 2000.0f64).powi(2));
        GasNetwork::new(
            vec![pipe(1, 2, length, d)],
            1,
            GasProperties { rho_std_kg_per_m3: 0.78, r_gas_j_per_kgk: 518.0, temperature_k: 288.0 },
            PressureLimits::default(),
        )
        .unwrap()
    }

    #[test]
    fn rhs_ideal_gas_golden_value() {
        let net = single_node_network();
        let node = net.node_index(2).unwrap();
        assert!((net.nodes()[node].volume_m3 - 50.0).abs() < 1e-9);
        let state = GasState::uniform(&net, net.citygate_pressure_abs());
        let mut inj = vec![0.0; 2];
        inj[node] = 0.01;
        let zero = vec![0.0; 2];
        let up = pressure_rhs(&net, &state, &inj, &zero).unwrap();
        assert!((up[node] - 2.983_68e-4).abs() < 1e-12, "{}", up[node]);
        let down = pressure_rhs(&net, &state, &zero, &inj).unwrap();
        assert_eq!(down[node], -up[node]);
        assert_eq!(up[net.citygate_index()], 0.0);
    }

    #[test]
    fn equilibrium_has_zero_rhs() {
        let net = single_node_network();
        let state = GasState::uniform(&net, net.citygate_pressure_abs());
        let rhs = pressure_rhs(&net, &state, &[0.0; 2], &[0.0; 2]).unwrap();
        assert!(rhs.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn citygate_never_absorbs_gas() {
        let net = single_node_network();
        let mut state = GasState::uniform(&net, net.citygate_pressure_abs());
        state.pressures_bar_abs[net.node_index(2).unwrap()] += 0.5;
        let state = GasState::from_pressures(&net, state.pressures_bar_abs);
        assert_eq!(state.citygate_flow_kg_per_s, 0.0);
        assert!(state.pipe_flows_kg_per_s.iter().all(|q| *q == 0.0));
    }

    /// Dynamic volume of exactly 100 m³.
    fn budget_network() -> GasNetwork {
        let d = 200.0;
        let length = 200.0 / (PI * (d / 2000.0f64).powi(2));
        GasNetwork::new(vec![pipe(1, 2, length, d)], 1, GasProperties::default(), PressureLimits::default()).unwrap()
    }

    #[test]
    fn budget_golden_value() {
        let net = budget_network();
        assert!((net.dynamic_volume_m3() - 100.0).abs() < 1e-9);
        let state = GasState::uniform(&net, net.p_max_abs() - 1.0);
        let b = max_sng_injectable(&net, &state, &[0.0, 0.0], 900.0);
        assert!((b - 67.031_317_031_317_03).abs() < 1e-9, "{b}");
    }

    #[test]
    fn budget_without_headroom_is_withdrawal_only() {
        let net = budget_network();
        let node = net.node_index(2).unwrap();
        let mut wd = vec![0.0; 2];
        wd[node] = 0.02;
        let full = GasState::uniform(&net, net.p_max_abs());
        assert!((max_sng_injectable(&net, &full, &wd, 900.0) - 18.0).abs() < 1e-9);
        let over = GasState::uniform(&net, net.p_max_abs() + 0.3);
        assert_eq!(max_sng_injectable(&net, &over, &[0.0; 2], 900.0), 0.0);
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let err = GasNetwork::new(
            vec![pipe(1, 2, 100.0, 100.0), pipe(3, 4, 100.0, 100.0)],
            1,
            GasProperties::default(),
            PressureLimits::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GasError::Disconnected(_)));
    }

    #[test]
    fn bad_geometry_is_rejected() {
        let err =
            GasNetwork::new(vec![pipe(1, 2, 0.0, 100.0)], 1, GasProperties::default(), PressureLimits::default()).unwrap_err();
        assert!(matches!(err, GasError::InvalidPipe { .. }));
    }
}
