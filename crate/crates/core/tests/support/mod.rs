//! Shared fixtures for the integration tests: reference solvers written
//! independently of the library numerics, random network generators and
//! small hand-built scenarios.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use p2gsim_core::economics::{CapexRates, CostScenario, OpexFractions, PlantSizing};
use p2gsim_core::electric::{Branch, ElectricalNetwork, Transformer};
use p2gsim_core::gas::{GasNetwork, GasProperties, Pipe, PressureLimits};
use p2gsim_core::plant::{MethPhase, MethState, PlantConfig};
use p2gsim_core::scenario::{MonthDay, Profile, ProfileRole, Scenario, SeasonCalendar, TimeGrid};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn demo_config() -> PathBuf {
    repo_path("data/demo/scenario.json")
}

pub fn validation_config() -> PathBuf {
    repo_path("data/validation/validation.json")
}

// ---------------------------------------------------------------------------
// Newton-Raphson power flow in polar coordinates

/// Bus voltages (indexed like `network.buses()`) from a full Newton solve
/// of the nodal equations `S_i = V_i conj(Σ_j Y_ij V_j)`. Roots are slack
/// buses at the network's slack voltage, all other buses are PQ.
pub fn newton_power_flow(network: &ElectricalNetwork, injections: &[Complex64], tol: f64) -> Vec<Complex64> {
    let n = network.bus_count();
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for b in &network.branches {
        let i = network.bus_index(b.from).unwrap();
        let j = network.bus_index(b.to).unwrap();
        let g = Complex64::new(1.0, 0.0) / b.impedance();
        y[(i, i)] += g;
        y[(j, j)] += g;
        y[(i, j)] -= g;
        y[(j, i)] -= g;
    }
    let pq: Vec<usize> = (0..n).filter(|&i| !network.is_root(i)).collect();
    let m = pq.len();
    let mut vm = vec![network.slack_voltage_pu; n];
    let mut va = vec![0.0; n];

    for _ in 0..50 {
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let mut current = Complex64::new(0.0, 0.0);
            for j in 0..n {
                current += y[(i, j)] * v[j];
            }
            let s = v[i] * current.conj();
            p[i] = s.re;
            q[i] = s.im;
        }
        let mut mismatch = DVector::<f64>::zeros(2 * m);
        for (k, &i) in pq.iter().enumerate() {
            mismatch[k] = injections[i].re - p[i];
            mismatch[m + k] = injections[i].im - q[i];
        }
        if mismatch.amax() < tol {
            return v;
        }
        let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for (a, &i) in pq.iter().enumerate() {
            for (b, &j) in pq.iter().enumerate() {
                let g = y[(i, j)].re;
                let bb = y[(i, j)].im;
                if i == j {
                    jac[(a, b)] = -q[i] - bb * vm[i] * vm[i];
                    jac[(a, m + b)] = p[i] / vm[i] + g * vm[i];
                    jac[(m + a, b)] = p[i] - g * vm[i] * vm[i];
                    jac[(m + a, m + b)] = q[i] / vm[i] - bb * vm[i];
                } else {
                    let t = va[i] - va[j];
                    let (s, c) = t.sin_cos();
                    jac[(a, b)] = vm[i] * vm[j] * (g * s - bb * c);
                    jac[(a, m + b)] = vm[i] * (g * c + bb * s);
                    jac[(m + a, b)] = -vm[i] * vm[j] * (g * c + bb * s);
                    jac[(m + a, m + b)] = vm[i] * (g * s - bb * c);
                }
            }
        }
        let dx = jac.lu().solve(&mismatch).expect("nonsingular Jacobian");
        for (k, &i) in pq.iter().enumerate() {
            va[i] += dx[k];
            vm[i] += dx[m + k];
        }
    }
    panic!("Newton power flow did not converge");
}

/// Random radial forest with `1..=3` feeders and at most `max_buses` buses,
/// plus a random injection per bus (pu, generation positive).
pub fn random_radial(rng: &mut ChaCha8Rng, max_buses: usize) -> (ElectricalNetwork, Vec<Complex64>) {
    let n = rng.random_range(2..=max_buses);
    let feeders = rng.random_range(1..=3.min(n));
    let ids: Vec<u32> = {
        let mut v: Vec<u32> = (1..=n as u32).map(|i| i * 7 + 3).collect();
        for i in (1..v.len()).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    };
    let transformers: Vec<Transformer> = (0..feeders).map(|f| Transformer { id: f as u32 + 1, root_bus: ids[f] }).collect();
    let mut branches = Vec::new();
    for k in feeders..n {
        let parent = ids[rng.random_range(0..k)];
        let (from, to) = if rng.random_bool(0.5) { (parent, ids[k]) } else { (ids[k], parent) };
        branches.push(Branch {
            from,
            to,
            r_pu: rng.random_range(0.002..0.03),
            x_pu: rng.random_range(0.0..0.03),
            length_km: 1.0,
        });
    }
    for i in (1..branches.len()).rev() {
        branches.swap(i, rng.random_range(0..=i));
    }
    let slack = rng.random_range(0.97..1.03);
    let net = ElectricalNetwork::new(10.0, 15.0, slack, transformers, branches).expect("generated tree is radial");
    let injections = (0..net.bus_count())
        .map(|i| {
            if net.is_root(i) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1))
            }
        })
        .collect();
    (net, injections)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Gas networks

/// Random tree of `n` nodes rooted at a citygate with id 1.
pub fn random_gas_tree(rng: &mut ChaCha8Rng, n: usize) -> GasNetwork {
    let pipes = (2..=n as u32)
        .map(|k| Pipe {
            from: rng.random_range(1..k),
            to: k,
            length_m: rng.random_range(100.0..2000.0),
            diameter_mm: [80.0, 100.0, 125.0, 150.0][rng.random_range(0..4)],
        })
        .collect();
    GasNetwork::new(pipes, 1, GasProperties::default(), PressureLimits::default()).expect("valid tree")
}

// ---------------------------------------------------------------------------
// Levelized cost, computed from the definitions year by year

#[derive(Debug)]
pub struct LcInputs {
    pub sizing: PlantSizing,
    pub surplus_mwh: f64,
    pub deficit_mwh: f64,
    pub sng_mwh: f64,
    pub co2_t: f64,
    pub o2_t: f64,
    pub heat_mwh: f64,
}

/// Discounted yearly net costs and SNG energies: (Σ cost_y / (1+r)^y, Σ e_y / (1+r)^y).
pub fn lc_oracle_parts(x: &LcInputs, s: &CostScenario) -> (f64, f64) {
    let ce = x.sizing.electrolyzer_kwe * s.capex.electrolyzer_eur_per_kwe;
    let cb = x.sizing.h2_buffer_m3 * s.capex.h2_buffer_eur_per_m3_h2;
    let cm = x.sizing.methanation_kw_sng * s.capex.methanation_eur_per_kw_sng;
    let n = s.plant_lifetime_y as i32;
    let mut cost = ce + cb + cm;
    let mut energy = 0.0;
    for y in 1..=n {
        let d = (1.0 + s.wacc).powi(y);
        let opex = s.opex_fraction.electrolyzer * ce + s.opex_fraction.h2_buffer * cb + s.opex_fraction.methanation * cm;
        let el = x.surplus_mwh * s.surplus_price_eur_per_mwh + x.deficit_mwh * s.deficit_price_eur_per_mwh;
        let co2 = x.co2_t * s.co2_cost_eur_per_t;
        let replace = s.replacement_period_y > 0 && y < n && (y as u32).is_multiple_of(s.replacement_period_y);
        let cr = if replace { s.stack_replacement_fraction * ce } else { 0.0 };
        let rev = x.o2_t * s.o2_revenue_eur_per_t + x.heat_mwh * s.heat_revenue_eur_per_mwh;
        cost += (opex + el + co2 + cr - rev) / d;
        energy += x.sng_mwh / d;
    }
    (cost, energy)
}

pub fn lc_oracle(x: &LcInputs, s: &CostScenario) -> f64 {
    let (c, e) = lc_oracle_parts(x, s);
    c / e
}

pub fn random_cost_scenario(rng: &mut ChaCha8Rng) -> CostScenario {
    CostScenario {
        year_label: 2000 + rng.random_range(0..60),
        capex: CapexRates {
            electrolyzer_eur_per_kwe: rng.random_range(200.0..1500.0),
            h2_buffer_eur_per_m3_h2: rng.random_range(10.0..150.0),
            methanation_eur_per_kw_sng: rng.random_range(100.0..1000.0),
        },
        opex_fraction: OpexFractions {
            electrolyzer: rng.random_range(0.0..0.06),
            h2_buffer: rng.random_range(0.0..0.04),
            methanation: rng.random_range(0.0..0.08),
        },
        plant_lifetime_y: rng.random_range(1..=40),
        wacc: rng.random_range(0.0..0.15),
        deficit_price_eur_per_mwh: rng.random_range(0.0..150.0),
        surplus_price_eur_per_mwh: rng.random_range(0.0..40.0),
        stack_replacement_fraction: rng.random_range(0.0..0.6),
        replacement_period_y: rng.random_range(0..=10),
        co2_cost_eur_per_t: rng.random_range(0.0..120.0),
        o2_revenue_eur_per_t: rng.random_range(0.0..150.0),
        heat_revenue_eur_per_mwh: rng.random_range(0.0..60.0),
    }
}

pub fn random_lc_inputs(rng: &mut ChaCha8Rng) -> LcInputs {
    let sng = rng.random_range(50.0..3000.0);
    LcInputs {
        sizing: PlantSizing {
            electrolyzer_kwe: rng.random_range(100.0..5000.0),
            h2_buffer_m3: rng.random_range(10.0..2000.0),
            methanation_kw_sng: rng.random_range(50.0..2500.0),
        },
        surplus_mwh: rng.random_range(0.0..4000.0),
        deficit_mwh: rng.random_range(0.0..1000.0),
        sng_mwh: sng,
        co2_t: 0.2 * sng * rng.random_range(0.8..1.2),
        o2_t: 0.3 * sng * rng.random_range(0.8..1.2),
        heat_mwh: 0.3 * sng * rng.random_range(0.5..1.5),
    }
}

// ---------------------------------------------------------------------------
// Hand-built scenarios

pub fn date(y: i32, m: u32, d: u32) -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

pub fn standard_calendar() -> SeasonCalendar {
    let md = |m, d| MonthDay::new(m, d).unwrap();
    SeasonCalendar::new(vec![(md(1, 1), md(4, 15)), (md(10, 15), md(12, 31))]).unwrap()
}

/// Three feeders of three buses each (roots 1, 2, 3); bus `10f + 2` hosts
/// a plant, bus `10f + 1` the load and the RES.
pub fn three_feeder_network() -> ElectricalNetwork {
    let mut branches = Vec::new();
    for f in 1..=3u32 {
        branches.push(Branch { from: f, to: 10 * f + 1, r_pu: 0.01, x_pu: 0.008, length_km: 2.0 });
        branches.push(Branch { from: 10 * f + 1, to: 10 * f + 2, r_pu: 0.01, x_pu: 0.008, length_km: 2.0 });
    }
    let transformers = (1..=3).map(|f| Transformer { id: f, root_bus: f }).collect();
    ElectricalNetwork::new(10.0, 15.0, 1.0, transformers, branches).unwrap()
}

/// Citygate 1 feeding a chain 1-2-3-4 with a spur 2-5; plants attach at 3, 4, 5.
pub fn small_gas_network(length_m: f64, diameter_mm: f64) -> GasNetwork {
    let pipes = [(1, 2), (2, 3), (3, 4), (2, 5)].into_iter().map(|(from, to)| Pipe { from, to, length_m, diameter_mm }).collect();
    GasNetwork::new(pipes, 1, GasProperties::default(), PressureLimits::default()).unwrap()
}

pub fn running_plant(name: &str, en_bus: u32, gn_node: u32, buffer_bar: f64, meth_load: f64) -> PlantConfig {
    PlantConfig {
        name: name.into(),
        en_bus,
        gn_node,
        electrolyzer: Default::default(),
        buffer: Default::default(),
        methanation: Default::default(),
        initial_buffer_pressure_bar: Some(buffer_bar),
        initial_methanation: Some(MethState { phase: MethPhase::UpAndRunning, load_kg_per_h: meth_load }),
    }
}

/// A summer day on the three-feeder grid starting at 08:00: low gas demand,
/// a midday RES surplus that grows from feeder 1 to feeder 3, and three
/// plants already running with buffers at 18, 22 and 26 bar.
pub fn episode_scenario() -> Scenario {
    let steps = 96;
    let start = date(2030, 7, 1) + chrono::Duration::hours(8);
    let grid = TimeGrid::new(start, 900, steps).unwrap();
    let mut profiles = Vec::new();
    for (f, peak) in [(1u32, 700.0), (2, 1000.0), (3, 2600.0)] {
        let res: Vec<f64> = (0..steps)
            .map(|t| {
                let h = (8.0 + t as f64 / 4.0) % 24.0;
                let x = std::f64::consts::PI * (h - 6.0) / 12.0;
                if (6.0..18.0).contains(&h) {
                    300.0 + peak * x.sin()
                } else {
                    0.0
                }
            })
            .collect();
        profiles.push(Profile { role: ProfileRole::ElectricLoadKw, node_id: 10 * f + 1, samples: vec![300.0; steps] });
        profiles.push(Profile { role: ProfileRole::ResGenerationKw, node_id: 10 * f + 1, samples: res });
    }
    for node in [2u32, 4, 5] {
        profiles.push(Profile { role: ProfileRole::GasWithdrawalKgPerS, node_id: node, samples: vec![0.0008; steps] });
    }
    Scenario {
        name: "episode".into(),
        seed: 7,
        time_grid: grid,
        calendar: standard_calendar(),
        ng_lhv_kwh_per_kg: 13.1,
        electrical_network: three_feeder_network(),
        gas_network: small_gas_network(3000.0, 200.0),
        initial_gas_pressure_barg: Some(4.75),
        plants: vec![
            running_plant("P2G#1", 12, 3, 18.0, 6.0),
            running_plant("P2G#2", 22, 4, 22.0, 6.0),
            running_plant("P2G#3", 32, 5, 26.0, 6.0),
        ],
        cost_scenarios: vec![CostScenario::preset_2030(), CostScenario::preset_2050()],
        profiles,
    }
}

// ---------------------------------------------------------------------------
// Scripted checks on a dispatch log

#[derive(Debug, serde::Deserialize)]
struct LogRow {
    step: usize,
    plant: String,
    role: String,
    meth_phase: u8,
    buffer_bar: f64,
    electrolyzer_kw: f64,
    surplus_share_kw: f64,
    h2_target_kg_per_h: f64,
    meth_load_kg_per_h: f64,
    curtailed: u8,
    budget_binding: u8,
}

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Read `dispatch_log.csv` and check the control narrative of a binding
/// SNG budget: the budget starts slack and then binds; the running plant
/// with the fullest buffer keeps producing while the others are shed;
/// curtailed plants keep their electrolyzer on the feeder surplus until
/// the tank is full; a full tank then caps the electrolyzer.
pub fn episode_checks(scenario: &Scenario, log: &std::path::Path) -> Vec<Check> {
    let mut rdr = csv::Reader::from_path(log).expect("dispatch log readable");
    let rows: Vec<LogRow> = rdr.deserialize().collect::<Result<_, _>>().expect("dispatch log parses");
    let plants = &scenario.plants;
    let n = plants.len();
    let steps = rows.len() / n;
    let dt_h = scenario.time_grid.step_hours();
    let at = |t: usize, p: usize| &rows[t * n + p];
    for (t, chunk) in rows.chunks(n).enumerate() {
        for (row, cfg) in chunk.iter().zip(plants) {
            assert_eq!((row.step, row.plant.as_str()), (t, cfg.name.as_str()), "log rows out of order");
        }
    }
    let before = |t: usize, p: usize| -> (f64, f64, u8) {
        if t == 0 {
            let s = plants[p].initial_state();
            (s.buffer_pressure(&plants[p]), s.meth.load_kg_per_h, s.meth.phase.code())
        } else {
            let r = at(t - 1, p);
            (r.buffer_bar, r.meth_load_kg_per_h, r.meth_phase)
        }
    };
    let uncapped = |r: &LogRow, cfg: &PlantConfig| {
        let el = &cfg.electrolyzer;
        if r.surplus_share_kw > 0.0 {
            (r.surplus_share_kw + el.standby_power_kw).min(el.nominal_power_kw)
        } else {
            el.standby_power_kw
        }
    };
    let mut out = Vec::new();

    let first_binding = (0..steps).find(|&t| at(t, 0).budget_binding == 1);
    out.push(Check {
        name: "budget binds after a slack start",
        pass: matches!(first_binding, Some(t) if t > 0),
        detail: format!("first binding step {first_binding:?}"),
    });

    let mut kept = Vec::new();
    let mut priority_breaches = Vec::new();
    for t in (0..steps).filter(|&t| at(t, 0).budget_binding == 1) {
        let running: Vec<usize> = (0..n).filter(|&p| at(t, p).role == "running").collect();
        let floor = |p: usize| {
            let (_, load, phase) = before(t, p);
            if phase == 3 {
                (load - plants[p].methanation.ramp_down_kg_per_h * dt_h).max(0.0)
            } else {
                0.0
            }
        };
        for &i in &running {
            for &j in &running {
                let (bi, bj) = (before(t, i).0, before(t, j).0);
                let j_extra = at(t, j).h2_target_kg_per_h > floor(j) + 1e-9;
                if bi > bj + 1e-9 && at(t, i).curtailed == 1 && j_extra {
                    priority_breaches.push((t, i, j));
                }
            }
        }
        if running.len() >= 2 {
            let top = *running.iter().max_by(|&&a, &&b| before(t, a).0.total_cmp(&before(t, b).0)).unwrap();
            let others_shed = running.iter().filter(|&&p| p != top).all(|&p| at(t, p).h2_target_kg_per_h == 0.0);
            if at(t, top).h2_target_kg_per_h > 0.0 && others_shed {
                kept.push((t, plants[top].name.clone()));
            }
        }
    }
    out.push(Check {
        name: "fullest running buffer kept, others shed",
        pass: !kept.is_empty() && priority_breaches.is_empty(),
        detail: format!("kept-alone steps {:?}, priority breaches {:?}", kept, priority_breaches),
    });

    let mut unreduced = 0;
    let mut reduced = Vec::new();
    for t in 0..steps {
        for (p, cfg) in plants.iter().enumerate() {
            let r = at(t, p);
            if r.curtailed == 1 && r.surplus_share_kw > 0.0 && r.buffer_bar < cfg.buffer.p_max_bar - 1e-6 {
                if (r.electrolyzer_kw - uncapped(r, cfg)).abs() <= 1e-9 * cfg.electrolyzer.nominal_power_kw {
                    unreduced += 1;
                } else {
                    reduced.push((t, p));
                }
            }
        }
    }
    out.push(Check {
        name: "curtailed methanation leaves the electrolyzer on the surplus",
        pass: unreduced > 0 && reduced.is_empty(),
        detail: format!("{unreduced} curtailed steps at full surplus setpoint, reduced at {reduced:?}"),
    });

    let mut capped_full = 0;
    let mut capped_with_room = Vec::new();
    for t in 0..steps {
        for (p, cfg) in plants.iter().enumerate() {
            let r = at(t, p);
            let wanted = uncapped(r, cfg);
            if r.electrolyzer_kw < wanted - 1e-6 {
                let el = &cfg.electrolyzer;
                let h2 = (wanted - el.standby_power_kw) * dt_h / el.specific_consumption_kwh_per_kg;
                let room = cfg.buffer.max_mass() - cfg.buffer.mass_at(before(t, p).0) + r.meth_load_kg_per_h * dt_h;
                if h2 > room {
                    capped_full += (r.buffer_bar >= cfg.buffer.p_max_bar - 1e-6) as usize;
                } else {
                    capped_with_room.push((t, p));
                }
            }
        }
    }
    out.push(Check {
        name: "full buffer caps the electrolyzer",
        pass: capped_full > 0 && capped_with_room.is_empty(),
        detail: format!("{capped_full} capped steps ending at p_max, capped with tank room at {capped_with_room:?}"),
    });
    out
}
