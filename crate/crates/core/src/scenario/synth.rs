//! Seeded synthetic demand and generation profiles for demo scenarios.
//!
//! Shapes are simple: PV follows a daylight bell whose length and height vary
//! with the season, wind follows a mean-reverting random walk pushed through a
//! cubic power curve, electric demand has morning and evening peaks, and gas
//! demand is a degree-day heating term on top of a year-round base. Seasonal
//! targets (gas heating ratio, RES summer/winter ratio, gas peak) are hit by
//! solving for one scale parameter each, not by tuning constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Profile, ProfileRole, ScenarioError, Season, SeasonCalendar, TimeGrid, DAYS_PER_YEAR};
use crate::electric::{BusId, ElectricalNetwork};
use crate::gas::{GasNetwork, NodeId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederTargets {
    pub transformer: u32,
    pub pv_mw: f64,
    pub wt_mw: f64,
    /// Demand capacity: the peak of the feeder's summed electric demand, or
    /// an upper bound on it when an annual energy is also given.
    pub el_demand_mw: f64,
    /// Annual demand energy; the profile is scaled to it over a 365-day year.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub el_demand_energy_mwh: Option<f64>,
}

fn ten() -> f64 {
    10.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTargets {
    /// Peak of the summed gas withdrawals, as NG power at LHV.
    pub peak_gas_demand_mw: f64,
    #[serde(default = "ten")]
    pub heating_to_non_heating_gas_ratio: f64,
    /// RES energy in June–August over December–February.
    #[serde(default = "two")]
    pub summer_to_winter_res_ratio: f64,
    pub feeders: Vec<FeederTargets>,
    /// Withdrawal nodes; every non-citygate node when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_nodes: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub profiles: Vec<Profile>,
    pub installed_pv_kw: BTreeMap<BusId, f64>,
    pub installed_wt_kw: BTreeMap<BusId, f64>,
}

fn seasonal(day_of_year: u32, peak_day: f64) -> f64 {
    (2.0 * PI * (day_of_year as f64 - peak_day) / 365.0).cos()
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    (-((hour - centre) / width).powi(2)).exp()
}

fn is_summer(month: u32) -> bool {
    (6..=8).contains(&month)
}

fn is_winter(month: u32) -> bool {
    month == 12 || month <= 2
}

pub fn synthesize_demo_profiles(
    grid: &TimeGrid,
    calendar: &SeasonCalendar,
    targets: &SynthTargets,
    electrical: &ElectricalNetwork,
    gas: &GasNetwork,
    ng_lhv_kwh_per_kg: f64,
    seed: u64,
) -> Result<SynthOutput, ScenarioError> {
    if !(targets.peak_gas_demand_mw >= 0.0 && targets.peak_gas_demand_mw.is_finite()) {
        return Err(ScenarioError::invalid(format!("peak gas demand {} MW must be non-negative", targets.peak_gas_demand_mw)));
    }
    if !(targets.heating_to_non_heating_gas_ratio >= 1.0) || !(targets.summer_to_winter_res_ratio > 0.0) {
        return Err(ScenarioError::invalid("seasonal ratios must be positive (gas heating ratio at least 1)"));
    }
    for f in &targets.feeders {
        if !(f.pv_mw >= 0.0 && f.wt_mw >= 0.0 && f.el_demand_mw >= 0.0 && f.el_demand_energy_mwh.is_none_or(|e| e >= 0.0)) {
            return Err(ScenarioError::invalid(format!("transformer {} has a negative capacity target", f.transformer)));
        }
        if !electrical.transformers.iter().any(|t| t.id == f.transformer) {
            return Err(ScenarioError::invalid(format!("targets name unknown transformer {}", f.transformer)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.step_count;
    let positions: Vec<_> = (0..n).map(|t| grid.position(t)).collect();
    let days = n.div_ceil(grid.steps_per_day().max(1.0) as usize) + 1;
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    // Weather shared by all feeders.
    let clearness: Vec<f64> = (0..days).map(|_| rng.random_range(0.35..1.0f64).powf(0.7)).collect();
    let mut wind = Vec::with_capacity(n);
    let phi = (-grid.step_hours() / 18.0).exp();
    let mut x = 0.0;
    for pos in &positions {
        x = phi * x + (1.0 - phi * phi).sqrt() * 0.45 * unit.sample(&mut rng);
        let mean = 6.5 * (1.0 + 0.3 * seasonal(pos.day_of_year, 15.0));
        let v = mean * x.exp();
        wind.push((((v - 3.0) / 9.0).clamp(0.0, 1.0)).powi(3));
    }
    let start_second = grid.start.num_seconds_from_midnight() as u64;
    let elapsed_day = |t: usize| ((start_second + t as u64 * grid.step_seconds as u64) / 86_400) as usize;
    let pv_shape: Vec<f64> = positions
        .iter()
        .enumerate()
        .map(|(t, pos)| {
            let s = seasonal(pos.day_of_year, 172.0);
            let daylength = 12.0 + 3.5 * s;
            let rise = 12.5 - daylength / 2.0;
            let h = pos.hour() + grid.step_hours() / 2.0;
            if h <= rise || h >= rise + daylength {
                return 0.0;
            }
            let height = 0.6 + 0.25 * s;
            height * (PI * (h - rise) / daylength).sin().powf(1.3) * clearness[elapsed_day(t)]
        })
        .collect();

    // PV seasonal modulation solved so that summer/winter RES meets the target.
    let total_pv: f64 = targets.feeders.iter().map(|f| f.pv_mw).sum();
    let total_wt: f64 = targets.feeders.iter().map(|f| f.wt_mw).sum();
    let pv_cf = |a: f64| -> Vec<f64> {
        positions
            .iter()
            .zip(&pv_shape)
            .map(|(pos, p)| (p * (1.0 + a * seasonal(pos.day_of_year, 172.0))).clamp(0.0, 0.95))
            .collect()
    };
    let res_ratio = |pv: &[f64]| -> Option<f64> {
        let (mut s, mut ns, mut w, mut nw) = (0.0, 0, 0.0, 0);
        for (t, pos) in positions.iter().enumerate() {
            let r = total_pv * pv[t] + total_wt * wind[t];
            if is_summer(pos.month) {
                s += r;
                ns += 1;
            } else if is_winter(pos.month) {
                w += r;
                nw += 1;
            }
        }
        (ns > 0 && nw > 0 && w > 0.0).then(|| (s / ns as f64) / (w / nw as f64))
    };
    let mut a = 0.0;
    if total_pv > 0.0 && res_ratio(&pv_cf(0.0)).is_some() {
        let (mut lo, mut hi) = (-0.9, 0.9);
        let target = targets.summer_to_winter_res_ratio;
        if res_ratio(&pv_cf(lo)).unwrap_or(0.0) >= target {
            a = lo;
        } else if res_ratio(&pv_cf(hi)).unwrap_or(f64::INFINITY) <= target {
            a = hi;
        } else {
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if res_ratio(&pv_cf(mid)).unwrap_or(0.0) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            a = 0.5 * (lo + hi);
        }
    }
    let pv = pv_cf(a);

    let year_fraction = DAYS_PER_YEAR as f64 * 24.0 / (n as f64 * grid.step_hours());
    let start_weekday = grid.start.weekday().num_days_from_monday() as usize;
    let demand_shape: Vec<f64> = positions
        .iter()
        .enumerate()
        .map(|(t, pos)| {
            let h = pos.hour();
            let weekend = (start_weekday + elapsed_day(t)) % 7 >= 5;
            let daily = 0.5 + 0.25 * bump(h, 8.5, 1.8) + 0.18 * bump(h, 13.0, 3.0) + 0.35 * bump(h, 19.5, 2.0);
            daily * (1.0 + 0.1 * seasonal(pos.day_of_year, 15.0)) * if weekend { 0.85 } else { 1.0 }
        })
        .collect();

    let mut profiles = Vec::new();
    let mut installed_pv_kw = BTreeMap::new();
    let mut installed_wt_kw = BTreeMap::new();
    for (f, transformer) in electrical.transformers.iter().enumerate() {
        let mut buses: Vec<BusId> = electrical
            .buses()
            .iter()
            .enumerate()
            .filter(|(i, b)| b.feeder == f && !electrical.is_root(*i))
            .map(|(_, b)| b.id)
            .collect();
        if buses.is_empty() {
            buses.push(transformer.root_bus);
        }
        buses.sort_unstable();
        let target = targets.feeders.iter().find(|t| t.transformer == transformer.id);
        let (pv_mw, wt_mw, demand_mw) = target.map_or((0.0, 0.0, 0.0), |t| (t.pv_mw, t.wt_mw, t.el_demand_mw));
        let energy_mwh = target.and_then(|t| t.el_demand_energy_mwh);

        let load_w = weights(&mut rng, buses.len());
        let pv_w = weights(&mut rng, buses.len());
        let wt_w = weights(&mut rng, buses.len());
        let noise: Vec<Vec<f64>> =
            buses.iter().map(|_| (0..n).map(|_| (1.0 + 0.04 * unit.sample(&mut rng)).max(0.0)).collect()).collect();
        let mut loads: Vec<Vec<f64>> =
            load_w.iter().zip(&noise).map(|(w, z)| demand_shape.iter().zip(z).map(|(d, e)| w * d * e).collect()).collect();
        let feeder_sum: Vec<f64> = (0..n).map(|t| loads.iter().map(|l| l[t]).sum::<f64>()).collect();
        let peak = feeder_sum.iter().copied().fold(0.0, f64::max);
        let scale = match energy_mwh {
            Some(e) => {
                let annual_mwh = feeder_sum.iter().sum::<f64>() * grid.step_hours() / 1000.0 * year_fraction;
                let k = if annual_mwh > 0.0 { e / annual_mwh } else { 0.0 };
                if peak * k > demand_mw * 1000.0 * (1.0 + 1e-9) {
                    return Err(ScenarioError::invalid(format!(
                        "transformer {}: {e} MWh/year needs a {:.3} MW peak, above the {demand_mw} MW demand capacity",
                        transformer.id,
                        peak * k / 1000.0
                    )));
                }
                k
            }
            None if peak > 0.0 => demand_mw * 1000.0 / peak,
            None => 0.0,
        };
        for l in &mut loads {
            l.iter_mut().for_each(|v| *v *= scale);
        }

        for (k, bus) in buses.iter().enumerate() {
            let pv_kw = pv_mw * 1000.0 * pv_w[k];
            let wt_kw = wt_mw * 1000.0 * wt_w[k];
            installed_pv_kw.insert(*bus, pv_kw);
            installed_wt_kw.insert(*bus, wt_kw);
            profiles.push(Profile { role: ProfileRole::ElectricLoadKw, node_id: *bus, samples: std::mem::take(&mut loads[k]) });
            profiles.push(Profile {
                role: ProfileRole::ResGenerationKw,
                node_id: *bus,
                samples: (0..n).map(|t| pv_kw * pv[t] + wt_kw * wind[t]).collect(),
            });
        }
    }

    let gas_nodes: Vec<NodeId> = match &targets.gas_nodes {
        Some(ids) => {
            for id in ids {
                if gas.node_index(*id).is_none_or(|i| i == gas.citygate_index()) {
                    return Err(ScenarioError::invalid(format!("gas withdrawal node {id} is not a non-citygate node")));
                }
            }
            ids.clone()
        }
        None => {
            let mut ids: Vec<NodeId> =
                gas.nodes().iter().enumerate().filter(|(i, _)| *i != gas.citygate_index()).map(|(_, n)| n.id).collect();
            ids.sort_unstable();
            ids
        }
    };
    let temperature: Vec<f64> = (0..days)
        .map(|d| {
            let doy = (positions.first().map_or(0, |p| p.day_of_year) + d as u32) % 365;
            12.0 - 9.0 * seasonal(doy, 15.0) + 2.0 * unit.sample(&mut rng)
        })
        .collect();
    let heating_shape: Vec<f64> = positions
        .iter()
        .enumerate()
        .map(|(t, pos)| {
            if calendar.season_of_day(pos.day_of_year) != Season::Heating {
                return 0.0;
            }
            let h = pos.hour();
            let degree_days = (18.0 - temperature[elapsed_day(t)]).max(1.0);
            let daily = 0.45 + 0.8 * bump(h, 7.0, 1.5) + 0.6 * bump(h, 19.0, 2.5) + 0.25 * bump(h, 13.0, 3.0);
            degree_days * daily
        })
        .collect();
    let base_shape: Vec<f64> = positions
        .iter()
        .map(|pos| {
            let h = pos.hour();
            0.3 + 0.7 * bump(h, 7.5, 1.2) + 0.9 * bump(h, 19.5, 1.5) + 0.4 * bump(h, 12.5, 1.0)
        })
        .collect();
    let season_mean = |v: &[f64], season: Season| -> Option<f64> {
        let (s, c) = positions
            .iter()
            .zip(v)
            .filter(|(p, _)| calendar.season_of_day(p.day_of_year) == season)
            .fold((0.0, 0usize), |(s, c), (_, x)| (s + x, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    // Heating term weight k: (k·H_h + B_h) / B_nh = ratio.
    let k = match (
        season_mean(&heating_shape, Season::Heating),
        season_mean(&base_shape, Season::Heating),
        season_mean(&base_shape, Season::NonHeating),
    ) {
        (Some(hh), Some(bh), Some(bn)) if hh > 0.0 => ((targets.heating_to_non_heating_gas_ratio * bn - bh) / hh).max(0.0),
        _ => 1.0,
    };
    let total: Vec<f64> = heating_shape.iter().zip(&base_shape).map(|(h, b)| k * h + b).collect();
    let peak_kg_per_s = targets.peak_gas_demand_mw * 1000.0 / ng_lhv_kwh_per_kg / 3600.0;
    let max_total = total.iter().copied().fold(0.0, f64::max);
    let gas_scale = if max_total > 0.0 { peak_kg_per_s / max_total } else { 0.0 };
    let gas_w = weights(&mut rng, gas_nodes.len());
    for (id, w) in gas_nodes.iter().zip(gas_w) {
        profiles.push(Profile {
            role: ProfileRole::GasWithdrawalKgPerS,
            node_id: *id,
            samples: total.iter().map(|v| v * gas_scale * w).collect(),
        });
    }

    Ok(SynthOutput { profiles, installed_pv_kw, installed_wt_kw })
}

/// Random positive weights summing to one.
fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}
