use std::fmt;

use serde::Serialize;

use super::SimulationResult;
use crate::plant::{ramp_band, MethPhase};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed excess of a node pressure over the upper limit (bar).
    pub gas_pressure_bar: f64,
    pub buffer_pressure_bar: f64,
    pub ramp_kg_per_h: f64,
    pub electric_kw: f64,
    /// Hydrogen buffer ledger, kg.
    pub h2_mass_kg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { gas_pressure_bar: 0.02, buffer_pressure_bar: 1e-9, ramp_kg_per_h: 1e-9, electric_kw: 1e-6, h2_mass_kg: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    GasOverpressure,
    BufferPressure,
    MethanationRamp,
    ElectricLedger,
    HydrogenLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantViolation {
    pub step: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {:?}: {}", self.step, self.kind, self.detail)
    }
}

/// Every constraint breach recorded in `result`; empty when the run is clean.
pub fn check_invariants(result: &SimulationResult, tol: &Tolerances) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let mut push = |step, kind, detail: String| out.push(InvariantViolation { step, kind, detail });
    let dt_h = result.step_hours();
    let p_max = result.meta.p_max_barg;
    let mut previous = result.meta.initial_plant_states.clone();

    for (t, r) in result.records.iter().enumerate() {
        if r.gas.max_pressure_barg > p_max + tol.gas_pressure_bar {
            push(t, ViolationKind::GasOverpressure, format!("{:.4} barg above {p_max} barg", r.gas.max_pressure_barg));
        }
        for (f, fr) in r.feeders.iter().enumerate() {
            let residual = fr.surplus_kw - fr.absorbed_kw - fr.rpf_kw;
            if residual.abs() > tol.electric_kw || fr.absorbed_kw < -tol.electric_kw {
                push(
                    t,
                    ViolationKind::ElectricLedger,
                    format!(
                        "feeder {}: surplus {:.6} kW, absorbed {:.6} kW, rpf {:.6} kW",
                        result.meta.transformer_ids[f], fr.surplus_kw, fr.absorbed_kw, fr.rpf_kw
                    ),
                );
            }
        }
        for (p, cfg) in result.meta.plants.iter().enumerate() {
            let pr = &r.plants[p];
            let buf = &cfg.buffer;
            if pr.buffer_pressure_bar < buf.p_min_bar - tol.buffer_pressure_bar
                || pr.buffer_pressure_bar > buf.p_max_bar + tol.buffer_pressure_bar
            {
                push(t, ViolationKind::BufferPressure, format!("{}: {:.6} bar", cfg.name, pr.buffer_pressure_bar));
            }
            let before = &previous[p];
            let expected = before.buffer.stored_mass_kg + pr.step.h2_produced_kg - pr.step.h2_to_methanation_kg;
            if (expected - pr.stored_h2_kg).abs() > tol.h2_mass_kg {
                push(
                    t,
                    ViolationKind::HydrogenLedger,
                    format!("{}: stored {:.9} kg, ledger {:.9} kg", cfg.name, pr.stored_h2_kg, expected),
                );
            }
            if before.meth.phase == MethPhase::UpAndRunning {
                let (lo, hi) = ramp_band(&cfg.methanation, before.meth.load_kg_per_h, dt_h);
                let load = pr.meth_load_kg_per_h;
                if load < lo - tol.ramp_kg_per_h || load > hi + tol.ramp_kg_per_h {
                    push(
                        t,
                        ViolationKind::MethanationRamp,
                        format!("{}: {:.6} -> {:.6} kg/h outside [{lo:.6}, {hi:.6}]", cfg.name, before.meth.load_kg_per_h, load),
                    );
                }
            }
            previous[p].buffer.stored_mass_kg = pr.stored_h2_kg;
            previous[p].meth.load_kg_per_h = pr.meth_load_kg_per_h;
            previous[p].meth.phase = phase_from_code(pr.phase, previous[p].meth.phase);
        }
    }
    out
}

fn phase_from_code(code: u8, fallback: MethPhase) -> MethPhase {
    match code {
        1 => MethPhase::HotStandby,
        // Remaining balancing steps do not matter for the ramp check.
        2 => MethPhase::ReactorBalancing { remaining_steps: 0 },
        3 => MethPhase::UpAndRunning,
        _ => fallback,
    }
}
