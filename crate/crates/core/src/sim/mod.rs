//! Time-stepped co-simulation of the electric network, the gas network and
//! the P2G plants.

mod aggregate;
mod invariants;
mod report;
mod validate;

use chrono::{Duration, NaiveDateTime};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::coordinator::{coordinate, DispatchRole};
use crate::economics::{AnnualAccounts, CostScenario, PlantEconomics, PlantSizing};
use crate::electric::{bfs_power_flow, transformer_balance, ElectricalState, FeederTotals, PowerFlowError, PowerFlowOptions};
use crate::gas::{
    self as gasnet, max_sng_injectable, steady_state_solve, GasError, GasState, SteadyOptions, StepOptions, ATMOSPHERIC_BAR,
};
use crate::plant::{plant_step, PlantConfig, PlantError, PlantState, PlantStepResult};
use crate::scenario::{season_of, ProfileRole, Scenario, Season, DAYS_PER_YEAR};

pub use aggregate::{aggregate, ElectricSeasonRow, GasSeasonRow, Period, PlantSeasonRow, SeasonalTables};
pub use invariants::{check_invariants, InvariantViolation, Tolerances, ViolationKind};
pub use report::{emit_reports, REPORT_FILES};
pub use validate::{validate_gas_model, GasValidation, ValidationOptions};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("step {step}: power flow failed: {source}")]
    PowerFlow { step: usize, source: PowerFlowError },
    #[error("step {step}: gas network: {source}")]
    Gas { step: usize, source: GasError },
    #[error("step {step}: plant {plant}: {source}")]
    Plant { step: usize, plant: String, source: PlantError },
    #[error("initial gas state: {0}")]
    InitialGas(GasError),
    #[error("plant {plant}: bus or node {id} is not in the network")]
    Binding { plant: String, id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeederRecord {
    pub load_kw: f64,
    pub res_kw: f64,
    pub surplus_kw: f64,
    /// Reverse power flow with plants at standby, as seen by the coordinator.
    pub tentative_rpf_kw: f64,
    pub import_kw: f64,
    pub rpf_kw: f64,
    /// Surplus kept inside the feeder: `surplus - rpf`.
    pub absorbed_kw: f64,
    /// Electrolyzer power drawn on this feeder.
    pub p2g_kw: f64,
    pub losses_kw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantRecord {
    pub step: PlantStepResult,
    /// Setpoint the coordinator asked for, before tank trimming.
    pub requested_setpoint_kw: f64,
    pub surplus_share_kw: f64,
    pub role: DispatchRole,
    pub h2_target_kg_per_h: f64,
    pub requested_kg_per_h: f64,
    pub curtailed: bool,
    /// State at the end of the step.
    pub stored_h2_kg: f64,
    pub buffer_pressure_bar: f64,
    pub phase: u8,
    pub meth_load_kg_per_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasRecord {
    pub min_pressure_barg: f64,
    pub mean_pressure_barg: f64,
    pub max_pressure_barg: f64,
    pub citygate_kg: f64,
    pub withdrawn_kg: f64,
    pub sng_injected_kg: f64,
    /// Stored mass at the end of the step.
    pub linepack_kg: f64,
    pub budget_kg: f64,
    pub budget_binding: bool,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub season: Season,
    pub feeders: Vec<FeederRecord>,
    pub plants: Vec<PlantRecord>,
    pub gas: GasRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub scenario_name: String,
    pub seed: u64,
    pub fingerprint: String,
    pub start: NaiveDateTime,
    pub step_seconds: u32,
    pub ng_lhv_kwh_per_kg: f64,
    pub transformer_ids: Vec<u32>,
    pub plants: Vec<PlantConfig>,
    pub cost_scenarios: Vec<CostScenario>,
    pub initial_plant_states: Vec<PlantState>,
    pub initial_linepack_kg: f64,
    pub p_max_barg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub meta: RunMetadata,
    pub records: Vec<StepRecord>,
    pub seasonal: SeasonalTables,
}

impl SimulationResult {
    pub fn step_hours(&self) -> f64 {
        self.meta.step_seconds as f64 / 3600.0
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.meta.start + Duration::seconds(t as i64 * self.meta.step_seconds as i64)
    }

    /// Factor turning horizon totals into a 365-day year.
    pub fn annualization(&self) -> f64 {
        let horizon_s = self.records.len() as f64 * self.meta.step_seconds as f64;
        DAYS_PER_YEAR as f64 * 86_400.0 / horizon_s
    }

    /// Horizon totals per plant, annualized.
    pub fn plant_accounts(&self) -> Vec<AnnualAccounts> {
        let k = self.annualization();
        (0..self.meta.plants.len())
            .map(|p| {
                let mut a = AnnualAccounts::default();
                for r in &self.records {
                    let s = &r.plants[p].step;
                    a.surplus_energy_mwh += s.electricity_surplus_kwh / 1000.0;
                    a.deficit_energy_mwh += s.electricity_deficit_kwh / 1000.0;
                    a.sng_mwh += s.sng_kwh / 1000.0;
                    a.co2_t += s.co2_consumed_kg / 1000.0;
                    a.o2_t += s.o2_produced_kg / 1000.0;
                    a.heat_mwh += s.heat_kwh / 1000.0;
                }
                a.scaled(k)
            })
            .collect()
    }

    pub fn plant_economics(&self) -> Vec<PlantEconomics> {
        self.meta
            .plants
            .iter()
            .zip(self.plant_accounts())
            .map(|(cfg, accounts)| PlantEconomics { name: cfg.name.clone(), sizing: PlantSizing::from_config(cfg), accounts })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub power_flow: PowerFlowOptions,
    pub gas_step: StepOptions,
    pub steady: SteadyOptions,
}

/// Per-bus and per-node series laid out by network index.
struct Inputs<'a> {
    load: Vec<Option<&'a [f64]>>,
    res: Vec<Option<&'a [f64]>>,
    withdrawal: Vec<Option<&'a [f64]>>,
}

impl<'a> Inputs<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let en = &scenario.electrical_network;
        let gn = &scenario.gas_network;
        let mut load = vec![None; en.bus_count()];
        let mut res = vec![None; en.bus_count()];
        let mut withdrawal = vec![None; gn.node_count()];
        for p in &scenario.profiles {
            let slot = match p.role {
                ProfileRole::ElectricLoadKw => en.bus_index(p.node_id).map(|i| &mut load[i]),
                ProfileRole::ResGenerationKw => en.bus_index(p.node_id).map(|i| &mut res[i]),
                ProfileRole::GasWithdrawalKgPerS => gn.node_index(p.node_id).map(|i| &mut withdrawal[i]),
            };
            if let Some(slot) = slot {
                *slot = Some(p.samples.as_slice());
            }
        }
        Self { load, res, withdrawal }
    }

    fn at(series: &[Option<&[f64]>], t: usize, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(series) {
            *o = s.map_or(0.0, |s| s[t]);
        }
    }
}

/// Run the scenario over its whole time grid.
pub fn run(scenario: &Scenario) -> Result<SimulationResult, SimError> {
    run_with(scenario, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, options: &RunOptions) -> Result<SimulationResult, SimError> {
    scenario.validate()?;
    let en = &scenario.electrical_network;
    let gn = &scenario.gas_network;
    let plants = &scenario.plants;
    let grid = &scenario.time_grid;
    let dt_h = grid.step_hours();
    let dt_s = grid.step_seconds_f64();
    let n_feeders = en.transformers.len();

    let mut plant_bus = Vec::with_capacity(plants.len());
    let mut plant_node = Vec::with_capacity(plants.len());
    let mut feeder_of = Vec::with_capacity(plants.len());
    for p in plants {
        let binding = |id| SimError::Binding { plant: p.name.clone(), id };
        let bus = en.bus_index(p.en_bus).ok_or_else(|| binding(p.en_bus))?;
        plant_bus.push(bus);
        feeder_of.push(en.buses()[bus].feeder);
        plant_node.push(gn.node_index(p.gn_node).ok_or_else(|| binding(p.gn_node))?);
    }

    let inputs = Inputs::new(scenario);
    let mut load = vec![0.0; en.bus_count()];
    let mut res = vec![0.0; en.bus_count()];
    let mut withdrawals = vec![0.0; gn.node_count()];
    let mut injections = vec![0.0; gn.node_count()];

    let mut gas = match scenario.initial_gas_pressure_barg {
        Some(p) => GasState::uniform(gn, p + ATMOSPHERIC_BAR),
        None => {
            Inputs::at(&inputs.withdrawal, 0, &mut withdrawals);
            let p = steady_state_solve(gn, &withdrawals, &injections, &options.steady).map_err(SimError::InitialGas)?;
            GasState::from_pressures(gn, p)
        }
    };
    let mut states: Vec<PlantState> = plants.iter().map(PlantConfig::initial_state).collect();
    let initial_plant_states = states.clone();
    let initial_linepack_kg = gn.stored_mass_kg(&gas.pressures_bar_abs);

    let mut records = Vec::with_capacity(grid.step_count);
    for t in 0..grid.step_count {
        Inputs::at(&inputs.load, t, &mut load);
        Inputs::at(&inputs.res, t, &mut res);
        Inputs::at(&inputs.withdrawal, t, &mut withdrawals);

        // (1) tentative power flow with every plant at standby
        let mut totals = vec![FeederTotals::default(); n_feeders];
        for (i, bus) in en.buses().iter().enumerate() {
            totals[bus.feeder].load_kw += load[i];
            totals[bus.feeder].res_kw += res[i];
        }
        let standby: Vec<f64> = plants.iter().map(|p| p.electrolyzer.standby_power_kw).collect();
        let tentative = solve_power_flow(scenario, &load, &res, &plant_bus, &standby, options)
            .map_err(|source| SimError::PowerFlow { step: t, source })?;
        let tentative_balance = transformer_balance(en, &tentative, &totals);
        let surplus: Vec<f64> = totals.iter().map(FeederTotals::surplus_kw).collect();

        // (2)-(4) setpoints, gas budget, methanation dispatch
        let budget = max_sng_injectable(gn, &gas, &withdrawals, dt_s);
        let directive = coordinate(plants, &states, &feeder_of, &surplus, budget, dt_h);

        // (5) plant steps
        injections.iter_mut().for_each(|v| *v = 0.0);
        let mut plant_records = Vec::with_capacity(plants.len());
        let mut drawn = Vec::with_capacity(plants.len());
        for (p, cfg) in plants.iter().enumerate() {
            let sp = &directive.setpoints[p];
            let d = &directive.plants[p];
            let (next, step) = plant_step(cfg, &states[p], sp.setpoint_kw, d.h2_target_kg_per_h, sp.surplus_share_kw, dt_h)
                .map_err(|source| SimError::Plant { step: t, plant: cfg.name.clone(), source })?;
            injections[plant_node[p]] += step.sng_kg / dt_s;
            drawn.push(step.setpoint_kw);
            plant_records.push(PlantRecord {
                step,
                requested_setpoint_kw: sp.setpoint_kw,
                surplus_share_kw: sp.surplus_share_kw,
                role: d.role,
                h2_target_kg_per_h: d.h2_target_kg_per_h,
                requested_kg_per_h: d.requested_kg_per_h,
                curtailed: d.curtailed,
                stored_h2_kg: next.buffer.stored_mass_kg,
                buffer_pressure_bar: next.buffer_pressure(cfg),
                phase: next.meth.phase.code(),
                meth_load_kg_per_h: next.meth.load_kg_per_h,
            });
            states[p] = next;
        }

        // (6) gas step
        let report = gasnet::step(gn, &gas, &injections, &withdrawals, dt_s, &options.gas_step)
            .map_err(|source| SimError::Gas { step: t, source })?;
        gas = report.state;

        // (7) final power flow with the dispatched loads
        let state = solve_power_flow(scenario, &load, &res, &plant_bus, &drawn, options)
            .map_err(|source| SimError::PowerFlow { step: t, source })?;
        let balance = transformer_balance(en, &state, &totals);

        // (8) record
        let mut p2g_kw = vec![0.0; n_feeders];
        for (p, kw) in drawn.iter().enumerate() {
            p2g_kw[feeder_of[p]] += kw;
        }
        let feeders = (0..n_feeders)
            .map(|f| FeederRecord {
                load_kw: totals[f].load_kw,
                res_kw: totals[f].res_kw,
                surplus_kw: surplus[f],
                tentative_rpf_kw: tentative_balance[f].rpf_kw,
                import_kw: balance[f].import_kw,
                rpf_kw: balance[f].rpf_kw,
                absorbed_kw: surplus[f] - balance[f].rpf_kw,
                p2g_kw: p2g_kw[f],
                losses_kw: en.pu_to_kw(state.feeder_losses_pu[f]),
            })
            .collect();
        let atm = ATMOSPHERIC_BAR;
        let sng: f64 = plant_records.iter().map(|r| r.step.sng_kg).sum();
        let withdrawn: f64 =
            withdrawals.iter().enumerate().filter(|(i, _)| *i != gn.citygate_index()).map(|(_, w)| w * dt_s).sum();
        records.push(StepRecord {
            season: season_of(grid, &scenario.calendar, t),
            feeders,
            plants: plant_records,
            gas: GasRecord {
                min_pressure_barg: gas_min(gn, &gas) - atm,
                mean_pressure_barg: gn.mean_pressure(&gas.pressures_bar_abs) - atm,
                max_pressure_barg: gas_max(gn, &gas) - atm,
                citygate_kg: report.citygate_mass_kg,
                withdrawn_kg: withdrawn,
                sng_injected_kg: sng,
                linepack_kg: gn.stored_mass_kg(&gas.pressures_bar_abs),
                budget_kg: directive.budget_kg,
                budget_binding: directive.budget_binding,
                substeps: report.substeps,
            },
        });
    }

    let meta = RunMetadata {
        scenario_name: scenario.name.clone(),
        seed: scenario.seed,
        fingerprint: scenario.fingerprint(),
        start: grid.start,
        step_seconds: grid.step_seconds,
        ng_lhv_kwh_per_kg: scenario.ng_lhv_kwh_per_kg,
        transformer_ids: en.transformers.iter().map(|t| t.id).collect(),
        plants: plants.clone(),
        cost_scenarios: scenario.cost_scenarios.clone(),
        initial_plant_states,
        initial_linepack_kg,
        p_max_barg: gn.limits.p_max_barg,
    };
    let seasonal = aggregate(&meta, &records);
    Ok(SimulationResult { meta, records, seasonal })
}

/// Extremes over the nodes that carry pressure dynamics.
fn gas_min(gn: &crate::gas::GasNetwork, gas: &GasState) -> f64 {
    gas.pressures_bar_abs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != gn.citygate_index())
        .map(|(_, p)| *p)
        .fold(f64::INFINITY, f64::min)
}

fn gas_max(gn: &crate::gas::GasNetwork, gas: &GasState) -> f64 {
    gas.pressures_bar_abs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != gn.citygate_index())
        .map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn solve_power_flow(
    scenario: &Scenario,
    load: &[f64],
    res: &[f64],
    plant_bus: &[usize],
    plant_kw: &[f64],
    options: &RunOptions,
) -> Result<ElectricalState, PowerFlowError> {
    let en = &scenario.electrical_network;
    let mut injections: Vec<Complex64> = load.iter().zip(res).map(|(l, g)| Complex64::new(en.kw_to_pu(g - l), 0.0)).collect();
    for (&bus, kw) in plant_bus.iter().zip(plant_kw) {
        injections[bus].re -= en.kw_to_pu(*kw);
    }
    bfs_power_flow(en, &injections, &options.power_flow)
}

#[cfg(test)]
mod tests;
