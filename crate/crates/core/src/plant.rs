//! Power-to-Gas plant: PEM electrolyzer, hydrogen buffer tank and a
//! methanation unit with ramp limits and a three-phase operating machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::electric::BusId;
use crate::gas::NodeId;

/// Lower heating value of hydrogen (kWh/kg).
pub const H2_LHV_KWH_PER_KG: f64 = 33.33;
pub const R_H2_J_PER_KGK: f64 = 4124.0;
/// Density of hydrogen at normal conditions (kg/Nm³).
pub const H2_NORMAL_DENSITY_KG_PER_M3: f64 = 0.08988;

/// Relative slack on bound checks, absorbing round-off in mass bookkeeping.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("electrolyzer setpoint {setpoint_kw:.3} kW outside [{min_kw:.3}, {max_kw:.3}] kW")]
    SetpointOutOfRange { setpoint_kw: f64, min_kw: f64, max_kw: f64 },
    #[error("hydrogen buffer would reach {pressure_bar:.4} bar, outside [{min_bar}, {max_bar}] bar")]
    BufferBounds { pressure_bar: f64, min_bar: f64, max_bar: f64 },
    #[error("invalid plant configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElectrolyzerConfig {
    pub nominal_power_kw: f64,
    pub min_load_fraction: f64,
    pub standby_power_kw: f64,
    /// Stack plus balance of plant.
    pub specific_consumption_kwh_per_kg: f64,
    pub o2_yield_kg_per_kg_h2: f64,
    pub heat_yield_kwh_per_kg_h2: f64,
}

impl Default for ElectrolyzerConfig {
    fn default() -> Self {
        Self {
            nominal_power_kw: 1200.0,
            min_load_fraction: 0.0,
            standby_power_kw: 20.0,
            specific_consumption_kwh_per_kg: 58.0,
            o2_yield_kg_per_kg_h2: 8.0,
            heat_yield_kwh_per_kg_h2: 3.0,
        }
    }
}

impl ElectrolyzerConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(0.0..1.0).contains(&self.min_load_fraction) {
            return Err(PlantError::InvalidConfig(format!("min_load_fraction {} not in [0, 1)", self.min_load_fraction)));
        }
        if !(self.specific_consumption_kwh_per_kg > H2_LHV_KWH_PER_KG) {
            return Err(PlantError::InvalidConfig(format!(
                "specific consumption {} kWh/kg is below the hydrogen LHV",
                self.specific_consumption_kwh_per_kg
            )));
        }
        if !(self.standby_power_kw >= 0.0 && self.standby_power_kw < self.nominal_power_kw) {
            return Err(PlantError::InvalidConfig(format!(
                "standby {} kW must be in [0, nominal {} kW)",
                self.standby_power_kw, self.nominal_power_kw
            )));
        }
        if self.o2_yield_kg_per_kg_h2 < 0.0 || self.heat_yield_kwh_per_kg_h2 < 0.0 {
            return Err(PlantError::InvalidConfig("electrolyzer yields must be non-negative".into()));
        }
        Ok(())
    }

    /// Lowest setpoint at which the stack may produce hydrogen.
    pub fn min_producing_kw(&self) -> f64 {
        self.standby_power_kw + self.min_load_fraction * (self.nominal_power_kw - self.standby_power_kw)
    }

    /// Setpoint producing `h2_kg_per_h`.
    pub fn power_for_rate(&self, h2_kg_per_h: f64) -> f64 {
        self.standby_power_kw + h2_kg_per_h * self.specific_consumption_kwh_per_kg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElectrolysisOutput {
    pub h2_kg: f64,
    pub o2_kg: f64,
    pub heat_kwh: f64,
    pub energy_kwh: f64,
}

/// Linear electrolyzer: power above standby turns into hydrogen at the
/// configured specific consumption.
pub fn electrolyzer_step(config: &ElectrolyzerConfig, setpoint_kw: f64, dt_h: f64) -> Result<ElectrolysisOutput, PlantError> {
    let slack = BOUND_SLACK * config.nominal_power_kw;
    if !(setpoint_kw >= config.standby_power_kw - slack && setpoint_kw <= config.nominal_power_kw + slack) {
        return Err(PlantError::SetpointOutOfRange {
            setpoint_kw,
            min_kw: config.standby_power_kw,
            max_kw: config.nominal_power_kw,
        });
    }
    let h2_kg = (setpoint_kw - config.standby_power_kw).max(0.0) * dt_h / config.specific_consumption_kwh_per_kg;
    Ok(ElectrolysisOutput {
        h2_kg,
        o2_kg: config.o2_yield_kg_per_kg_h2 * h2_kg,
        heat_kwh: config.heat_yield_kwh_per_kg_h2 * h2_kg,
        energy_kwh: setpoint_kw * dt_h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct H2BufferConfig {
    pub volume_m3: f64,
    pub temperature_k: f64,
    pub p_max_bar: f64,
    pub p_min_bar: f64,
    pub meth_trigger_bar: f64,
    pub r_h2_j_per_kgk: f64,
}

impl Default for H2BufferConfig {
    fn default() -> Self {
        Self {
            volume_m3: 20.0,
            temperature_k: 293.0,
            p_max_bar: 30.0,
            p_min_bar: 2.0,
            meth_trigger_bar: 15.0,
            r_h2_j_per_kgk: R_H2_J_PER_KGK,
        }
    }
}

impl H2BufferConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.volume_m3 > 0.0 && self.temperature_k > 0.0 && self.r_h2_j_per_kgk > 0.0) {
            return Err(PlantError::InvalidConfig("buffer volume, temperature and gas constant must be positive".into()));
        }
        if !(0.0 < self.p_min_bar && self.p_min_bar < self.meth_trigger_bar && self.meth_trigger_bar <= self.p_max_bar) {
            return Err(PlantError::InvalidConfig(format!(
                "buffer pressures must satisfy 0 < p_min ({}) < trigger ({}) <= p_max ({})",
                self.p_min_bar, self.meth_trigger_bar, self.p_max_bar
            )));
        }
        Ok(())
    }

    pub fn mass_at(&self, pressure_bar: f64) -> f64 {
        pressure_bar * 1e5 * self.volume_m3 / (self.r_h2_j_per_kgk * self.temperature_k)
    }

    pub fn pressure_of(&self, mass_kg: f64) -> f64 {
        mass_kg * self.r_h2_j_per_kgk * self.temperature_k / (self.volume_m3 * 1e5)
    }

    pub fn max_mass(&self) -> f64 {
        self.mass_at(self.p_max_bar)
    }

    pub fn min_mass(&self) -> f64 {
        self.mass_at(self.p_min_bar)
    }

    /// Working hydrogen between p_min and p_max, in Nm³.
    pub fn usable_normal_m3(&self) -> f64 {
        (self.max_mass() - self.min_mass()) / H2_NORMAL_DENSITY_KG_PER_M3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2BufferState {
    pub stored_mass_kg: f64,
}

/// Move hydrogen through the tank and return the new state and pressure.
pub fn buffer_apply(
    state: &H2BufferState,
    config: &H2BufferConfig,
    h2_in_kg: f64,
    h2_out_kg: f64,
) -> Result<(H2BufferState, f64), PlantError> {
    let mass = state.stored_mass_kg + h2_in_kg - h2_out_kg;
    let pressure = config.pressure_of(mass);
    let slack = BOUND_SLACK * config.p_max_bar;
    if !(pressure >= config.p_min_bar - slack && pressure <= config.p_max_bar + slack) {
        return Err(PlantError::BufferBounds { pressure_bar: pressure, min_bar: config.p_min_bar, max_bar: config.p_max_bar });
    }
    Ok((H2BufferState { stored_mass_kg: mass }, pressure))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethanationConfig {
    pub nominal_h2_intake_kg_per_h: f64,
    /// Largest increase of the H₂ intake per hour of elapsed time (kg/h per h).
    pub ramp_up_kg_per_h: f64,
    pub ramp_down_kg_per_h: f64,
    pub co2_ratio_kg_per_kg_h2: f64,
    pub ch4_yield_kg_per_kg_h2: f64,
    pub sng_lhv_kwh_per_kg: f64,
    pub heat_yield_kwh_per_kg_h2: f64,
    pub balancing_duration_steps: u32,
}

impl Default for MethanationConfig {
    fn default() -> Self {
        Self {
            nominal_h2_intake_kg_per_h: 20.0,
            ramp_up_kg_per_h: 3.8,
            ramp_down_kg_per_h: 46.0,
            co2_ratio_kg_per_kg_h2: 5.5,
            ch4_yield_kg_per_kg_h2: 2.0,
            sng_lhv_kwh_per_kg: 13.1,
            heat_yield_kwh_per_kg_h2: 5.0,
            balancing_duration_steps: 4,
        }
    }
}

impl MethanationConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.nominal_h2_intake_kg_per_h > 0.0 && self.ramp_up_kg_per_h > 0.0 && self.ramp_down_kg_per_h > 0.0) {
            return Err(PlantError::InvalidConfig("methanation capacity and ramps must be positive".into()));
        }
        if self.co2_ratio_kg_per_kg_h2 < 0.0
            || self.ch4_yield_kg_per_kg_h2 <= 0.0
            || self.sng_lhv_kwh_per_kg <= 0.0
            || self.heat_yield_kwh_per_kg_h2 < 0.0
        {
            return Err(PlantError::InvalidConfig("methanation yields must be non-negative".into()));
        }
        Ok(())
    }

    /// SNG output capacity in kW at LHV.
    pub fn nominal_sng_kw(&self) -> f64 {
        self.nominal_h2_intake_kg_per_h * self.ch4_yield_kg_per_kg_h2 * self.sng_lhv_kwh_per_kg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum MethPhase {
    HotStandby,
    /// Steps left before the reactor may take hydrogen.
    ReactorBalancing {
        remaining_steps: u32,
    },
    UpAndRunning,
}

impl MethPhase {
    /// 1, 2, 3 as numbered in plots of the operating state.
    pub fn code(&self) -> u8 {
        match self {
            MethPhase::HotStandby => 1,
            MethPhase::ReactorBalancing { .. } => 2,
            MethPhase::UpAndRunning => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethState {
    pub phase: MethPhase,
    /// Current H₂ intake (kg/h).
    pub load_kg_per_h: f64,
}

impl Default for MethState {
    fn default() -> Self {
        Self { phase: MethPhase::HotStandby, load_kg_per_h: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethanationOutput {
    pub state: MethState,
    pub h2_consumed_kg: f64,
    pub sng_kg: f64,
    pub co2_kg: f64,
    pub heat_kwh: f64,
}

/// Ramp-limited load band reachable from `load` within `dt_h`.
pub fn ramp_band(config: &MethanationConfig, load_kg_per_h: f64, dt_h: f64) -> (f64, f64) {
    let lo = (load_kg_per_h - config.ramp_down_kg_per_h * dt_h).max(0.0);
    let hi = (load_kg_per_h + config.ramp_up_kg_per_h * dt_h).min(config.nominal_h2_intake_kg_per_h);
    (lo, hi.max(lo))
}

/// Advance the methanation unit one step towards `h2_target_kg_per_h`.
/// The intake over the step is the end-of-step load times `dt_h`.
pub fn methanation_step(config: &MethanationConfig, state: &MethState, h2_target_kg_per_h: f64, dt_h: f64) -> MethanationOutput {
    let target = h2_target_kg_per_h.max(0.0);
    let next = match state.phase {
        MethPhase::HotStandby if target > 0.0 => {
            if config.balancing_duration_steps == 0 {
                running(config, 0.0, target, dt_h, false)
            } else {
                MethState {
                    phase: MethPhase::ReactorBalancing { remaining_steps: config.balancing_duration_steps - 1 },
                    load_kg_per_h: 0.0,
                }
            }
        }
        MethPhase::HotStandby => *state,
        MethPhase::ReactorBalancing { remaining_steps } if remaining_steps > 0 => {
            MethState { phase: MethPhase::ReactorBalancing { remaining_steps: remaining_steps - 1 }, load_kg_per_h: 0.0 }
        }
        MethPhase::ReactorBalancing { .. } => running(config, 0.0, target, dt_h, false),
        MethPhase::UpAndRunning => running(config, state.load_kg_per_h, target, dt_h, true),
    };
    let h2 = next.load_kg_per_h * dt_h;
    MethanationOutput {
        state: next,
        h2_consumed_kg: h2,
        sng_kg: config.ch4_yield_kg_per_kg_h2 * h2,
        co2_kg: config.co2_ratio_kg_per_kg_h2 * h2,
        heat_kwh: config.heat_yield_kwh_per_kg_h2 * h2,
    }
}

fn running(config: &MethanationConfig, load: f64, target: f64, dt_h: f64, may_stop: bool) -> MethState {
    let (lo, hi) = ramp_band(config, load, dt_h);
    let next = target.clamp(lo, hi);
    if may_stop && next == 0.0 && target == 0.0 {
        MethState::default()
    } else {
        MethState { phase: MethPhase::UpAndRunning, load_kg_per_h: next }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub name: String,
    pub en_bus: BusId,
    pub gn_node: NodeId,
    #[serde(default)]
    pub electrolyzer: ElectrolyzerConfig,
    #[serde(default)]
    pub buffer: H2BufferConfig,
    #[serde(default)]
    pub methanation: MethanationConfig,
    /// Starting tank pressure; p_min when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_buffer_pressure_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_methanation: Option<MethState>,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        self.electrolyzer.validate()?;
        self.buffer.validate()?;
        self.methanation.validate()?;
        if let Some(p) = self.initial_buffer_pressure_bar {
            if !(p >= self.buffer.p_min_bar && p <= self.buffer.p_max_bar) {
                return Err(PlantError::InvalidConfig(format!(
                    "initial buffer pressure {p} bar outside [{}, {}]",
                    self.buffer.p_min_bar, self.buffer.p_max_bar
                )));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self) -> PlantState {
        let p = self.initial_buffer_pressure_bar.unwrap_or(self.buffer.p_min_bar);
        PlantState {
            buffer: H2BufferState { stored_mass_kg: self.buffer.mass_at(p) },
            meth: self.initial_methanation.unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub buffer: H2BufferState,
    pub meth: MethState,
}

impl PlantState {
    pub fn buffer_pressure(&self, config: &PlantConfig) -> f64 {
        config.buffer.pressure_of(self.buffer.stored_mass_kg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlantStepResult {
    /// Electrolyzer power actually drawn after trimming to the tank headroom.
    pub setpoint_kw: f64,
    pub electricity_surplus_kwh: f64,
    pub electricity_deficit_kwh: f64,
    pub h2_produced_kg: f64,
    pub h2_to_methanation_kg: f64,
    pub sng_kg: f64,
    pub sng_kwh: f64,
    pub co2_consumed_kg: f64,
    pub o2_produced_kg: f64,
    pub heat_kwh: f64,
}

impl PlantStepResult {
    pub fn electricity_kwh(&self) -> f64 {
        self.electricity_surplus_kwh + self.electricity_deficit_kwh
    }
}

/// One plant timestep. Methanation moves first so the electrolyzer can be
/// trimmed to what the tank can take after this step's draw; the methanation
/// target is capped by the hydrogen that can be in the tank this step.
///
/// `surplus_kw` is the RES surplus assigned to this plant; consumption above
/// it is priced as deficit energy.
pub fn plant_step(
    config: &PlantConfig,
    state: &PlantState,
    setpoint_kw: f64,
    meth_target_kg_per_h: f64,
    surplus_kw: f64,
    dt_h: f64,
) -> Result<(PlantState, PlantStepResult), PlantError> {
    let el = &config.electrolyzer;
    let offered = electrolyzer_step(el, setpoint_kw, dt_h)?;
    let buffer = &config.buffer;
    let available = state.buffer.stored_mass_kg - buffer.min_mass() + offered.h2_kg;
    let target = meth_target_kg_per_h.min((available / dt_h).max(0.0));
    let meth = methanation_step(&config.methanation, &state.meth, target, dt_h);

    let headroom = buffer.max_mass() - state.buffer.stored_mass_kg + meth.h2_consumed_kg;
    let electrolysis = if offered.h2_kg > headroom {
        let trimmed = el.power_for_rate(headroom.max(0.0) / dt_h).clamp(el.standby_power_kw, setpoint_kw);
        electrolyzer_step(el, trimmed, dt_h)?
    } else {
        offered
    };
    let (buffer_state, _) = buffer_apply(&state.buffer, buffer, electrolysis.h2_kg, meth.h2_consumed_kg)?;

    let power = electrolysis.energy_kwh / dt_h;
    let from_surplus = power.min(surplus_kw.max(0.0));
    let result = PlantStepResult {
        setpoint_kw: power,
        electricity_surplus_kwh: from_surplus * dt_h,
        electricity_deficit_kwh: (power - from_surplus) * dt_h,
        h2_produced_kg: electrolysis.h2_kg,
        h2_to_methanation_kg: meth.h2_consumed_kg,
        sng_kg: meth.sng_kg,
        sng_kwh: meth.sng_kg * config.methanation.sng_lhv_kwh_per_kg,
        co2_consumed_kg: meth.co2_kg,
        o2_produced_kg: electrolysis.o2_kg,
        heat_kwh: electrolysis.heat_kwh + meth.heat_kwh,
    };
    Ok((PlantState { buffer: buffer_state, meth: meth.state }, result))
}
