//! Radial MV distribution network: topology, Backward-Forward Sweep power
//! flow and per-transformer reverse-power-flow accounting.
//!
//! Each HV/MV transformer is modelled as an ideal source holding its root bus
//! at the slack voltage, so every feeder is an independent radial tree.

mod bfs;

use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bfs::{bfs_power_flow, ElectricalState, PowerFlowOptions};

pub type BusId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("branch {from}-{to} has a negative impedance")]
    NegativeImpedance { from: BusId, to: BusId },
    #[error("branch {from}-{to} connects a bus to itself")]
    SelfLoop { from: BusId, to: BusId },
    #[error("topology is not radial: branch {from}-{to} closes a loop")]
    NotRadial { from: BusId, to: BusId },
    #[error("bus {0} is not reachable from any transformer")]
    Unreachable(BusId),
    #[error("bus {0} is the root of more than one transformer")]
    SharedRoot(BusId),
    #[error("network needs at least one transformer")]
    NoTransformer,
    #[error("invalid per-unit base: {0}")]
    InvalidBase(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("backward-forward sweep did not converge in {iterations} iterations (last max |dV| = {last_change:.3e} pu)")]
    NotConverged { iterations: usize, last_change: f64 },
    #[error("injection vector has {found} entries for {expected} buses")]
    InjectionLength { expected: usize, found: usize },
    #[error("non-finite injection at bus {0}")]
    NonFinite(BusId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub r_pu: f64,
    pub x_pu: f64,
    pub length_km: f64,
}

impl Branch {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r_pu, self.x_pu)
    }
}

/// HV/MV transformer feeding one radial feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub id: u32,
    pub root_bus: BusId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    /// Index into [`ElectricalNetwork::transformers`].
    pub feeder: usize,
    /// Parent bus index and the index of the branch joining them; `None` for roots.
    pub parent: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalNetwork {
    pub base_mva: f64,
    pub base_kv: f64,
    pub slack_voltage_pu: f64,
    pub transformers: Vec<Transformer>,
    pub branches: Vec<Branch>,
    buses: Vec<Bus>,
    index: HashMap<BusId, usize>,
    /// Bus indices ordered so that every parent precedes its children.
    order: Vec<usize>,
    roots: Vec<usize>,
}

impl ElectricalNetwork {
    pub fn new(
        base_mva: f64,
        base_kv: f64,
        slack_voltage_pu: f64,
        transformers: Vec<Transformer>,
        branches: Vec<Branch>,
    ) -> Result<Self, NetworkError> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(NetworkError::InvalidBase(format!("base_mva = {base_mva}")));
        }
        if !(slack_voltage_pu > 0.0 && slack_voltage_pu.is_finite()) {
            return Err(NetworkError::InvalidBase(format!("slack_voltage_pu = {slack_voltage_pu}")));
        }
        if transformers.is_empty() {
            return Err(NetworkError::NoTransformer);
        }

        let mut ids: Vec<BusId> = Vec::new();
        let mut index: HashMap<BusId, usize> = HashMap::new();
        let mut intern = |id: BusId, ids: &mut Vec<BusId>| -> usize {
            *index.entry(id).or_insert_with(|| {
                ids.push(id);
                ids.len() - 1
            })
        };
        for t in &transformers {
            intern(t.root_bus, &mut ids);
        }
        let mut adjacency: Vec<Vec<(usize, usize)>> = Vec::new();
        for (k, b) in branches.iter().enumerate() {
            if b.r_pu < 0.0 || b.x_pu < 0.0 || !b.r_pu.is_finite() || !b.x_pu.is_finite() {
                return Err(NetworkError::NegativeImpedance { from: b.from, to: b.to });
            }
            if b.from == b.to {
                return Err(NetworkError::SelfLoop { from: b.from, to: b.to });
            }
            let i = intern(b.from, &mut ids);
            let j = intern(b.to, &mut ids);
            adjacency.resize(ids.len(), Vec::new());
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        adjacency.resize(ids.len(), Vec::new());

        let mut roots = Vec::with_capacity(transformers.len());
        for t in &transformers {
            let r = index[&t.root_bus];
            if roots.contains(&r) {
                return Err(NetworkError::SharedRoot(t.root_bus));
            }
            roots.push(r);
        }

        let n = ids.len();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut feeder: Vec<Option<usize>> = vec![None; n];
        let mut used_branch = vec![false; branches.len()];
        let mut order = Vec::with_capacity(n);
        for (f, &r) in roots.iter().enumerate() {
            feeder[r] = Some(f);
        }
        for (f, &r) in roots.iter().enumerate() {
            let mut queue = VecDeque::from([r]);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for &(v, k) in &adjacency[u] {
                    if used_branch[k] {
                        continue;
                    }
                    used_branch[k] = true;
                    if feeder[v].is_some() {
                        return Err(NetworkError::NotRadial { from: branches[k].from, to: branches[k].to });
                    }
                    feeder[v] = Some(f);
                    parent[v] = Some((u, k));
                    queue.push_back(v);
                }
            }
        }
        if let Some(i) = feeder.iter().position(Option::is_none) {
            return Err(NetworkError::Unreachable(ids[i]));
        }

        let buses = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| Bus { id, feeder: feeder[i].expect("checked above"), parent: parent[i] })
            .collect();

        Ok(Self { base_mva, base_kv, slack_voltage_pu, transformers, branches, buses, index, order, roots })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Index of the transformer feeding `id`.
    pub fn feeder_of(&self, id: BusId) -> Option<usize> {
        self.bus_index(id).map(|i| self.buses[i].feeder)
    }

    pub fn root_index(&self, feeder: usize) -> usize {
        self.roots[feeder]
    }

    pub fn is_root(&self, bus_index: usize) -> bool {
        self.buses[bus_index].parent.is_none()
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// kW to per-unit on the network power base.
    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw / (self.base_mva * 1000.0)
    }

    pub fn pu_to_kw(&self, pu: f64) -> f64 {
        pu * self.base_mva * 1000.0
    }
}

/// Per-feeder profile sums used for surplus accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeederTotals {
    pub load_kw: f64,
    pub res_kw: f64,
}

impl FeederTotals {
    /// RES generation exceeding demand downstream of the transformer.
    pub fn surplus_kw(&self) -> f64 {
        (self.res_kw - self.load_kw).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformerBalance {
    /// Signed active power through the transformer; positive is HV→MV import.
    pub import_kw: f64,
    /// Reverse power flow, `max(0, -import)`.
    pub rpf_kw: f64,
    pub surplus_kw: f64,
}

/// Import, RPF and surplus per transformer. Feeders are not netted against
/// each other: a plant can only absorb the surplus of its own feeder.
pub fn transformer_balance(
    network: &ElectricalNetwork,
    state: &ElectricalState,
    totals: &[FeederTotals],
) -> Vec<TransformerBalance> {
    assert_eq!(totals.len(), network.transformers.len());
    state
        .transformer_power_pu
        .iter()
        .zip(totals)
        .map(|(s, t)| {
            let import_kw = network.pu_to_kw(s.re);
            TransformerBalance { import_kw, rpf_kw: (-import_kw).max(0.0), surplus_kw: t.surplus_kw() }
        })
        .collect()
}
