//! Plot-ready CSV output and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::SimulationResult;
use crate::economics::{sensitivity_sweep, SWEEP_SURPLUS_PRICES};
use crate::scenario::ScenarioError;

pub const REPORT_FILES: [&str; 9] = [
    "timeseries.csv",
    "seasonal_electric.csv",
    "seasonal_gas.csv",
    "seasonal_plants.csv",
    "dispatch_log.csv",
    "duration_curves.csv",
    "lc_sng.csv",
    "plant_economics.json",
    "manifest.json",
];

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    seed: u64,
    config_sha256: &'a str,
    start: String,
    step_seconds: u32,
    step_count: usize,
    files: BTreeMap<&'static str, String>,
}

fn io_err(path: &Path, e: impl Into<std::io::Error>) -> ScenarioError {
    ScenarioError::io(path, e.into())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ScenarioError> {
    csv::Writer::from_path(path).map_err(|e| ScenarioError::csv(path, e))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), ScenarioError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| ScenarioError::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| ScenarioError::csv(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_serialized<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ScenarioError> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| ScenarioError::csv(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Write every file in [`REPORT_FILES`] into `out_dir` (created if missing)
/// and return their paths. Output depends only on `result`, so identical
/// runs give byte-identical files.
pub fn emit_reports(result: &SimulationResult, out_dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let meta = &result.meta;
    let path = |name: &str| out_dir.join(name);

    let mut header: Vec<String> = vec!["step".into(), "timestamp".into(), "season".into()];
    for id in &meta.transformer_ids {
        for col in ["load_kw", "res_kw", "surplus_kw", "absorbed_kw", "rpf_kw", "import_kw", "p2g_kw"] {
            header.push(format!("tr{id}_{col}"));
        }
    }
    for p in &meta.plants {
        for col in ["electrolyzer_kw", "h2_kg", "buffer_bar", "meth_phase", "meth_load_kg_per_h", "sng_kg"] {
            header.push(format!("{}_{col}", p.name));
        }
    }
    for col in [
        "gas_min_barg",
        "gas_mean_barg",
        "gas_max_barg",
        "citygate_kg",
        "withdrawn_kg",
        "sng_kg",
        "linepack_kg",
        "budget_kg",
        "budget_binding",
    ] {
        header.push(col.into());
    }
    write_rows(
        &path(REPORT_FILES[0]),
        &header,
        result.records.iter().enumerate().map(|(t, r)| {
            let mut row = vec![t.to_string(), result.timestamp(t).to_string(), r.season.label().to_string()];
            for f in &r.feeders {
                for v in [f.load_kw, f.res_kw, f.surplus_kw, f.absorbed_kw, f.rpf_kw, f.import_kw, f.p2g_kw] {
                    row.push(v.to_string());
                }
            }
            for p in &r.plants {
                row.push(p.step.setpoint_kw.to_string());
                row.push(p.step.h2_produced_kg.to_string());
                row.push(p.buffer_pressure_bar.to_string());
                row.push(p.phase.to_string());
                row.push(p.meth_load_kg_per_h.to_string());
                row.push(p.step.sng_kg.to_string());
            }
            let g = &r.gas;
            for v in [
                g.min_pressure_barg,
                g.mean_pressure_barg,
                g.max_pressure_barg,
                g.citygate_kg,
                g.withdrawn_kg,
                g.sng_injected_kg,
                g.linepack_kg,
                g.budget_kg,
            ] {
                row.push(v.to_string());
            }
            row.push((g.budget_binding as u8).to_string());
            row
        }),
    )?;

    write_serialized(&path(REPORT_FILES[1]), &result.seasonal.electric)?;
    write_serialized(&path(REPORT_FILES[2]), &result.seasonal.gas)?;
    write_serialized(&path(REPORT_FILES[3]), &result.seasonal.plants)?;

    let dispatch_header: Vec<String> = [
        "step",
        "timestamp",
        "plant",
        "role",
        "meth_phase",
        "buffer_bar",
        "requested_setpoint_kw",
        "electrolyzer_kw",
        "surplus_share_kw",
        "requested_kg_per_h",
        "h2_target_kg_per_h",
        "meth_load_kg_per_h",
        "curtailed",
        "budget_kg",
        "budget_binding",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_rows(
        &path(REPORT_FILES[4]),
        &dispatch_header,
        result.records.iter().enumerate().flat_map(|(t, r)| {
            r.plants.iter().zip(&meta.plants).map(move |(p, cfg)| {
                vec![
                    t.to_string(),
                    result.timestamp(t).to_string(),
                    cfg.name.clone(),
                    serde_json::to_value(p.role).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
                    p.phase.to_string(),
                    p.buffer_pressure_bar.to_string(),
                    p.requested_setpoint_kw.to_string(),
                    p.step.setpoint_kw.to_string(),
                    p.surplus_share_kw.to_string(),
                    p.requested_kg_per_h.to_string(),
                    p.h2_target_kg_per_h.to_string(),
                    p.meth_load_kg_per_h.to_string(),
                    (p.curtailed as u8).to_string(),
                    r.gas.budget_kg.to_string(),
                    (r.gas.budget_binding as u8).to_string(),
                ]
            })
        }),
    )?;

    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    for (f, id) in meta.transformer_ids.iter().enumerate() {
        curves.push((format!("tr{id}_surplus_kw"), result.records.iter().map(|r| r.feeders[f].surplus_kw).collect()));
        curves.push((format!("tr{id}_rpf_kw"), result.records.iter().map(|r| r.feeders[f].rpf_kw).collect()));
    }
    for (p, cfg) in meta.plants.iter().enumerate() {
        curves.push((
            format!("{}_electrolyzer_kw", cfg.name),
            result.records.iter().map(|r| r.plants[p].step.setpoint_kw).collect(),
        ));
    }
    curves.push(("gas_mean_barg".into(), result.records.iter().map(|r| r.gas.mean_pressure_barg).collect()));
    let curves: Vec<(String, Vec<f64>)> = curves.into_iter().map(|(n, v)| (n, sorted_desc(v))).collect();
    let mut curve_header = vec!["rank".to_string(), "hours".to_string()];
    curve_header.extend(curves.iter().map(|(n, _)| n.clone()));
    let dt_h = result.step_hours();
    write_rows(
        &path(REPORT_FILES[5]),
        &curve_header,
        (0..result.records.len()).map(|k| {
            let mut row = vec![k.to_string(), ((k + 1) as f64 * dt_h).to_string()];
            row.extend(curves.iter().map(|(_, v)| v[k].to_string()));
            row
        }),
    )?;

    let economics = result.plant_economics();
    let sweep = sensitivity_sweep(&economics, &meta.cost_scenarios, &SWEEP_SURPLUS_PRICES);
    write_serialized(&path(REPORT_FILES[6]), &sweep)?;
    let econ_path = path(REPORT_FILES[7]);
    let json = serde_json::to_string_pretty(&economics).expect("plain data serializes");
    fs::write(&econ_path, json + "\n").map_err(|e| io_err(&econ_path, e))?;

    let mut files = BTreeMap::new();
    for name in &REPORT_FILES[..REPORT_FILES.len() - 1] {
        let p = path(name);
        let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
        files.insert(*name, hex::encode(Sha256::digest(&bytes)));
    }
    let manifest = Manifest {
        scenario: &meta.scenario_name,
        seed: meta.seed,
        config_sha256: &meta.fingerprint,
        start: meta.start.to_string(),
        step_seconds: meta.step_seconds,
        step_count: result.records.len(),
        files,
    };
    let manifest_path = path(REPORT_FILES[8]);
    let json = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
    fs::write(&manifest_path, json + "\n").map_err(|e| io_err(&manifest_path, e))?;

    Ok(REPORT_FILES.iter().map(|n| path(n)).collect())
}
