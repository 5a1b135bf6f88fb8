//! Scenario definition and ingestion.
//!
//! A scenario is a JSON root document pointing at CSV topologies, CSV
//! profiles (one column per node, header row of node ids, one row per
//! timestep), a JSON array of plant configurations and a JSON array of cost
//! scenarios. Relative paths resolve against the root document's directory.

mod calendar;
mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::economics::CostScenario;
use crate::electric::{Branch, ElectricalNetwork, Transformer};
use crate::gas::{GasNetwork, GasProperties, Pipe, PressureLimits};
use crate::plant::PlantConfig;

pub use calendar::{season_of, CalendarPosition, MonthDay, Season, SeasonCalendar, TimeGrid, DAYS_PER_YEAR};
pub use synth::{synthesize_demo_profiles, FeederTargets, SynthOutput, SynthTargets};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Json { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: u64, message: String },
    #[error("{path}: {message}")]
    DanglingReference { path: PathBuf, message: String },
    #[error("{path}: column for node {node} has {found} samples, the time grid has {expected}")]
    LengthMismatch { path: PathBuf, node: u32, expected: usize, found: usize },
    #[error("{}{message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Invalid { path: Option<PathBuf>, message: String },
}

impl ScenarioError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ScenarioError::Invalid { path: None, message: message.into() }
    }

    fn invalid_at(path: &Path, message: impl Into<String>) -> Self {
        ScenarioError::Invalid { path: Some(path.to_path_buf()), message: message.into() }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        ScenarioError::Io { path: path.to_path_buf(), source }
    }

    fn json(path: &Path, e: serde_json::Error) -> Self {
        ScenarioError::Json { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        ScenarioError::Csv { path: path.to_path_buf(), line, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileRole {
    ElectricLoadKw,
    ResGenerationKw,
    GasWithdrawalKgPerS,
}

impl ProfileRole {
    pub const ALL: [ProfileRole; 3] =
        [ProfileRole::ElectricLoadKw, ProfileRole::ResGenerationKw, ProfileRole::GasWithdrawalKgPerS];

    pub fn label(&self) -> &'static str {
        match self {
            ProfileRole::ElectricLoadKw => "electric_load_kw",
            ProfileRole::ResGenerationKw => "res_generation_kw",
            ProfileRole::GasWithdrawalKgPerS => "gas_withdrawal_kg_per_s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub role: ProfileRole,
    pub node_id: u32,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGridConfig {
    pub start: NaiveDateTime,
    pub step_minutes: u32,
    pub step_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricConfig {
    pub topology_csv: PathBuf,
    pub base_mva: f64,
    pub base_kv: f64,
    #[serde(default = "one")]
    pub slack_voltage_pu: f64,
    pub transformers: Vec<Transformer>,
}

fn one() -> f64 {
    1.0
}

fn default_lhv() -> f64 {
    13.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub topology_csv: PathBuf,
    pub citygate_node: u32,
    #[serde(flatten)]
    pub properties: GasProperties,
    #[serde(flatten)]
    pub limits: PressureLimits,
    /// Uniform starting pressure; the steady state of the first step's
    /// withdrawals when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pressure_barg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFiles {
    pub electric_load_csv: PathBuf,
    pub res_generation_csv: PathBuf,
    pub gas_withdrawal_csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    Files(ProfileFiles),
    Synthetic { synthetic: SynthTargets },
}

/// The root JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    pub name: String,
    pub seed: u64,
    pub time_grid: TimeGridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heating_season: Option<Vec<(MonthDay, MonthDay)>>,
    #[serde(default = "default_lhv")]
    pub ng_lhv_kwh_per_kg: f64,
    pub electric: ElectricConfig,
    pub gas: GasConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plants_json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_scenarios_json: Option<PathBuf>,
    pub profiles: ProfileSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub time_grid: TimeGrid,
    pub calendar: SeasonCalendar,
    pub ng_lhv_kwh_per_kg: f64,
    pub electrical_network: ElectricalNetwork,
    pub gas_network: GasNetwork,
    pub initial_gas_pressure_barg: Option<f64>,
    pub plants: Vec<PlantConfig>,
    pub cost_scenarios: Vec<CostScenario>,
    pub profiles: Vec<Profile>,
}

#[derive(Debug, Deserialize, Serialize)]
struct BranchRow {
    from: u32,
    to: u32,
    #[serde(rename = "R_pu")]
    r_pu: f64,
    #[serde(rename = "X_pu")]
    x_pu: f64,
    length_km: f64,
}

fn read_to_string(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ScenarioError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::json(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, ScenarioError> {
    let file = fs::File::open(path).map_err(|e| ScenarioError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ScenarioError> {
    let mut rdr = csv_reader(path)?;
    rdr.deserialize().map(|r| r.map_err(|e| ScenarioError::csv(path, e))).collect()
}

pub fn read_electrical_topology(path: &Path, cfg: &ElectricConfig) -> Result<ElectricalNetwork, ScenarioError> {
    let rows: Vec<BranchRow> = read_rows(path)?;
    let branches =
        rows.into_iter().map(|r| Branch { from: r.from, to: r.to, r_pu: r.r_pu, x_pu: r.x_pu, length_km: r.length_km }).collect();
    ElectricalNetwork::new(cfg.base_mva, cfg.base_kv, cfg.slack_voltage_pu, cfg.transformers.clone(), branches)
        .map_err(|e| ScenarioError::invalid_at(path, e.to_string()))
}

pub fn read_gas_topology(path: &Path, cfg: &GasConfig) -> Result<GasNetwork, ScenarioError> {
    let pipes: Vec<Pipe> = read_rows(path)?;
    GasNetwork::new(pipes, cfg.citygate_node, cfg.properties, cfg.limits)
        .map_err(|e| ScenarioError::invalid_at(path, e.to_string()))
}

/// Constant-demand case for checking the transient gas model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasValidationConfig {
    pub topology_csv: PathBuf,
    pub citygate_node: u32,
    /// CSV with columns `node,withdrawal_kg_per_s`.
    pub withdrawals_csv: PathBuf,
    #[serde(flatten)]
    pub properties: GasProperties,
    #[serde(flatten)]
    pub limits: PressureLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasValidationCase {
    pub network: GasNetwork,
    /// Indexed like the network nodes.
    pub withdrawals_kg_per_s: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct WithdrawalRow {
    node: u32,
    withdrawal_kg_per_s: f64,
}

pub fn load_gas_validation(path: &Path) -> Result<GasValidationCase, ScenarioError> {
    let cfg: GasValidationConfig = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let topology = resolve(base, &cfg.topology_csv);
    let pipes: Vec<Pipe> = read_rows(&topology)?;
    let network = GasNetwork::new(pipes, cfg.citygate_node, cfg.properties, cfg.limits)
        .map_err(|e| ScenarioError::invalid_at(&topology, e.to_string()))?;
    let wd_path = resolve(base, &cfg.withdrawals_csv);
    let mut withdrawals_kg_per_s = vec![0.0; network.node_count()];
    for row in read_rows::<WithdrawalRow>(&wd_path)? {
        match network.node_index(row.node) {
            Some(i) if i != network.citygate_index() => withdrawals_kg_per_s[i] += row.withdrawal_kg_per_s,
            _ => {
                return Err(ScenarioError::DanglingReference {
                    path: wd_path,
                    message: format!("withdrawal at node {}, which is not a non-citygate node", row.node),
                })
            }
        }
    }
    Ok(GasValidationCase { network, withdrawals_kg_per_s })
}

/// Read a profile matrix: header of node ids, one row per timestep.
pub fn read_profile_csv(path: &Path, role: ProfileRole) -> Result<Vec<Profile>, ScenarioError> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| ScenarioError::csv(path, e))?.clone();
    let mut profiles = Vec::with_capacity(header.len());
    let mut seen = BTreeSet::new();
    for h in header.iter() {
        let node_id: u32 = h.parse().map_err(|_| ScenarioError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header entry {h:?} is not a node id"),
        })?;
        if !seen.insert(node_id) {
            return Err(ScenarioError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: format!("node {node_id} appears twice in the header"),
            });
        }
        profiles.push(Profile { role, node_id, samples: Vec::new() });
    }
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(|e| ScenarioError::csv(path, e))? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (p, field) in profiles.iter_mut().zip(record.iter()) {
            let v: f64 = field.parse().map_err(|_| ScenarioError::Csv {
                path: path.to_path_buf(),
                line,
                message: format!("{field:?} is not a number (node {})", p.node_id),
            })?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScenarioError::Csv {
                    path: path.to_path_buf(),
                    line,
                    message: format!("sample {v} for node {} must be finite and non-negative", p.node_id),
                });
            }
            p.samples.push(v);
        }
    }
    Ok(profiles)
}

pub fn write_profile_csv(path: &Path, profiles: &[&Profile]) -> Result<(), ScenarioError> {
    let io_err = |e: csv::Error| ScenarioError::csv(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(profiles.iter().map(|p| p.node_id.to_string())).map_err(io_err)?;
    let n = profiles.first().map_or(0, |p| p.samples.len());
    for t in 0..n {
        w.write_record(profiles.iter().map(|p| p.samples[t].to_string())).map_err(io_err)?;
    }
    w.flush().map_err(|e| ScenarioError::io(path, e))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Load, resolve and validate a scenario from its root JSON document.
pub fn load_scenario(root_config_path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_with_seed(root_config_path, None)
}

/// As [`load_scenario`], replacing the document's seed when `seed` is given.
pub fn load_scenario_with_seed(root_config_path: &Path, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let mut cfg: RootConfig = read_json(root_config_path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let base = root_config_path.parent().unwrap_or(Path::new("."));
    let step_seconds = cfg
        .time_grid
        .step_minutes
        .checked_mul(60)
        .ok_or_else(|| ScenarioError::invalid_at(root_config_path, "step_minutes is too large"))?;
    let time_grid = TimeGrid::new(cfg.time_grid.start, step_seconds, cfg.time_grid.step_count)
        .map_err(|e| ScenarioError::invalid_at(root_config_path, e.to_string()))?;
    let calendar = match &cfg.heating_season {
        Some(intervals) => {
            SeasonCalendar::new(intervals.clone()).map_err(|e| ScenarioError::invalid_at(root_config_path, e.to_string()))?
        }
        None => SeasonCalendar::default(),
    };
    if !(cfg.ng_lhv_kwh_per_kg > 0.0) {
        return Err(ScenarioError::invalid_at(root_config_path, "ng_lhv_kwh_per_kg must be positive"));
    }

    let electrical_network = read_electrical_topology(&resolve(base, &cfg.electric.topology_csv), &cfg.electric)?;
    let gas_network = read_gas_topology(&resolve(base, &cfg.gas.topology_csv), &cfg.gas)?;

    let plants: Vec<PlantConfig> = match &cfg.plants_json {
        Some(p) => read_json(&resolve(base, p))?,
        None => Vec::new(),
    };
    let cost_scenarios: Vec<CostScenario> = match &cfg.cost_scenarios_json {
        Some(p) => read_json(&resolve(base, p))?,
        None => vec![CostScenario::preset_2030(), CostScenario::preset_2050()],
    };

    let profiles = match &cfg.profiles {
        ProfileSource::Files(files) => {
            let mut all = Vec::new();
            for (role, p) in [
                (ProfileRole::ElectricLoadKw, &files.electric_load_csv),
                (ProfileRole::ResGenerationKw, &files.res_generation_csv),
                (ProfileRole::GasWithdrawalKgPerS, &files.gas_withdrawal_csv),
            ] {
                let path = resolve(base, p);
                let ps = read_profile_csv(&path, role)?;
                check_profiles(&path, &ps, &time_grid, &electrical_network, &gas_network)?;
                all.extend(ps);
            }
            all
        }
        ProfileSource::Synthetic { synthetic } => {
            synthesize_demo_profiles(
                &time_grid,
                &calendar,
                synthetic,
                &electrical_network,
                &gas_network,
                cfg.ng_lhv_kwh_per_kg,
                cfg.seed,
            )
            .map_err(|e| match e {
                ScenarioError::Invalid { path: None, message } => ScenarioError::invalid_at(root_config_path, message),
                other => other,
            })?
            .profiles
        }
    };

    let scenario = Scenario {
        name: cfg.name,
        seed: cfg.seed,
        time_grid,
        calendar,
        ng_lhv_kwh_per_kg: cfg.ng_lhv_kwh_per_kg,
        electrical_network,
        gas_network,
        initial_gas_pressure_barg: cfg.gas.initial_pressure_barg,
        plants,
        cost_scenarios,
        profiles,
    };
    let plants_path = cfg.plants_json.as_ref().map(|p| resolve(base, p)).unwrap_or_else(|| root_config_path.to_path_buf());
    scenario.validate_plants(&plants_path)?;
    if let Some(p) = &cfg.cost_scenarios_json {
        for c in &scenario.cost_scenarios {
            c.validate().map_err(|e| ScenarioError::invalid_at(&resolve(base, p), e.to_string()))?;
        }
    }
    if let Some(p) = scenario.initial_gas_pressure_barg {
        if !(p + crate::gas::ATMOSPHERIC_BAR > 0.0 && p <= scenario.gas_network.limits.p_max_barg) {
            return Err(ScenarioError::invalid_at(
                root_config_path,
                format!("initial gas pressure {p} barg is outside the network band"),
            ));
        }
    }
    Ok(scenario)
}

fn check_profiles(
    path: &Path,
    profiles: &[Profile],
    grid: &TimeGrid,
    en: &ElectricalNetwork,
    gn: &GasNetwork,
) -> Result<(), ScenarioError> {
    for p in profiles {
        if p.samples.len() != grid.step_count {
            return Err(ScenarioError::LengthMismatch {
                path: path.to_path_buf(),
                node: p.node_id,
                expected: grid.step_count,
                found: p.samples.len(),
            });
        }
        let known = match p.role {
            ProfileRole::ElectricLoadKw | ProfileRole::ResGenerationKw => en.bus_index(p.node_id).is_some(),
            ProfileRole::GasWithdrawalKgPerS => gn.node_index(p.node_id).is_some_and(|i| i != gn.citygate_index()),
        };
        if !known {
            let what = match p.role {
                ProfileRole::GasWithdrawalKgPerS => "a non-citygate gas node",
                _ => "an electrical bus",
            };
            return Err(ScenarioError::DanglingReference {
                path: path.to_path_buf(),
                message: format!("{} profile references node {}, which is not {what}", p.role.label(), p.node_id),
            });
        }
    }
    Ok(())
}

impl Scenario {
    fn validate_plants(&self, path: &Path) -> Result<(), ScenarioError> {
        let mut names = BTreeSet::new();
        for p in &self.plants {
            p.validate().map_err(|e| ScenarioError::invalid_at(path, format!("plant {}: {e}", p.name)))?;
            if !names.insert(p.name.as_str()) {
                return Err(ScenarioError::invalid_at(path, format!("plant name {} is used twice", p.name)));
            }
            if self.electrical_network.bus_index(p.en_bus).is_none() {
                return Err(ScenarioError::DanglingReference {
                    path: path.to_path_buf(),
                    message: format!("plant {} is bound to electrical bus {}, which does not exist", p.name, p.en_bus),
                });
            }
            match self.gas_network.node_index(p.gn_node) {
                None => {
                    return Err(ScenarioError::DanglingReference {
                        path: path.to_path_buf(),
                        message: format!("plant {} is bound to gas node {}, which does not exist", p.name, p.gn_node),
                    })
                }
                Some(i) if i == self.gas_network.citygate_index() => {
                    return Err(ScenarioError::invalid_at(path, format!("plant {} cannot inject at the citygate node", p.name)));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Check every invariant of an in-memory scenario (used after
    /// programmatic construction).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let here = Path::new("<memory>");
        let mut seen = BTreeSet::new();
        for p in &self.profiles {
            if !seen.insert((p.role, p.node_id)) {
                return Err(ScenarioError::invalid(format!("two {} profiles for node {}", p.role.label(), p.node_id)));
            }
            if let Some(v) = p.samples.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(ScenarioError::invalid(format!("{} profile of node {} has sample {v}", p.role.label(), p.node_id)));
            }
        }
        check_profiles(here, &self.profiles, &self.time_grid, &self.electrical_network, &self.gas_network)?;
        self.validate_plants(here)?;
        for c in &self.cost_scenarios {
            c.validate().map_err(|e| ScenarioError::invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// The same scenario restricted to steps `first..first + count`.
    pub fn window(&self, first: usize, count: usize) -> Result<Scenario, ScenarioError> {
        let end = first.checked_add(count).filter(|e| *e <= self.time_grid.step_count && count > 0);
        let Some(end) = end else {
            return Err(ScenarioError::invalid(format!(
                "window {first}+{count} does not fit a {}-step grid",
                self.time_grid.step_count
            )));
        };
        let offset = chrono::Duration::seconds(first as i64 * self.time_grid.step_seconds as i64);
        let mut out = self.clone();
        out.time_grid = TimeGrid::new(self.time_grid.start + offset, self.time_grid.step_seconds, count)?;
        for p in &mut out.profiles {
            p.samples = p.samples[first..end].to_vec();
        }
        Ok(out)
    }

    pub fn profiles_of(&self, role: ProfileRole) -> impl Iterator<Item = &Profile> {
        self.profiles.iter().filter(move |p| p.role == role)
    }

    /// SHA-256 over a canonical rendering of every input.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        put(self.name.as_bytes());
        put(&self.seed.to_le_bytes());
        put(serde_json::to_string(&self.time_grid).expect("serializable").as_bytes());
        put(serde_json::to_string(&self.calendar).expect("serializable").as_bytes());
        put(&self.ng_lhv_kwh_per_kg.to_le_bytes());
        let en = &self.electrical_network;
        for v in [en.base_mva, en.base_kv, en.slack_voltage_pu] {
            put(&v.to_le_bytes());
        }
        put(serde_json::to_string(&en.transformers).expect("serializable").as_bytes());
        put(serde_json::to_string(&en.branches).expect("serializable").as_bytes());
        let gn = &self.gas_network;
        put(serde_json::to_string(&gn.pipes).expect("serializable").as_bytes());
        put(&gn.citygate_id().to_le_bytes());
        put(serde_json::to_string(&gn.properties).expect("serializable").as_bytes());
        put(serde_json::to_string(&gn.limits).expect("serializable").as_bytes());
        put(serde_json::to_string(&self.initial_gas_pressure_barg).expect("serializable").as_bytes());
        put(serde_json::to_string(&self.plants).expect("serializable").as_bytes());
        put(serde_json::to_string(&self.cost_scenarios).expect("serializable").as_bytes());
        for p in &self.profiles {
            put(p.role.label().as_bytes());
            put(&p.node_id.to_le_bytes());
            let mut bytes = Vec::with_capacity(p.samples.len() * 8);
            for s in &p.samples {
                bytes.extend_from_slice(&s.to_le_bytes());
            }
            put(&bytes);
        }
        hex::encode(h.finalize())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| ScenarioError::io(path, e))
}

/// Write `scenario` into `dir` as a root document plus data files; loading the
/// returned root path yields an equal scenario.
pub fn save_scenario(scenario: &Scenario, dir: &Path) -> Result<PathBuf, ScenarioError> {
    fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let en = &scenario.electrical_network;
    let en_path = dir.join("electric_topology.csv");
    {
        let mut w = csv::Writer::from_path(&en_path).map_err(|e| ScenarioError::csv(&en_path, e))?;
        for b in &en.branches {
            w.serialize(BranchRow { from: b.from, to: b.to, r_pu: b.r_pu, x_pu: b.x_pu, length_km: b.length_km })
                .map_err(|e| ScenarioError::csv(&en_path, e))?;
        }
        w.flush().map_err(|e| ScenarioError::io(&en_path, e))?;
    }
    let gn = &scenario.gas_network;
    let gn_path = dir.join("gas_topology.csv");
    {
        let mut w = csv::Writer::from_path(&gn_path).map_err(|e| ScenarioError::csv(&gn_path, e))?;
        for p in &gn.pipes {
            w.serialize(p).map_err(|e| ScenarioError::csv(&gn_path, e))?;
        }
        w.flush().map_err(|e| ScenarioError::io(&gn_path, e))?;
    }
    let names = ["electric_load.csv", "res_generation.csv", "gas_withdrawal.csv"];
    for (role, name) in ProfileRole::ALL.iter().zip(names) {
        let ps: Vec<&Profile> = scenario.profiles_of(*role).collect();
        write_profile_csv(&dir.join(name), &ps)?;
    }
    write_json(&dir.join("plants.json"), &scenario.plants)?;
    write_json(&dir.join("cost_scenarios.json"), &scenario.cost_scenarios)?;

    let grid = &scenario.time_grid;
    if !grid.step_seconds.is_multiple_of(60) {
        return Err(ScenarioError::invalid("only whole-minute steps can be saved"));
    }
    let root = RootConfig {
        name: scenario.name.clone(),
        seed: scenario.seed,
        time_grid: TimeGridConfig { start: grid.start, step_minutes: grid.step_seconds / 60, step_count: grid.step_count },
        heating_season: Some(scenario.calendar.heating_intervals.clone()),
        ng_lhv_kwh_per_kg: scenario.ng_lhv_kwh_per_kg,
        electric: ElectricConfig {
            topology_csv: "electric_topology.csv".into(),
            base_mva: en.base_mva,
            base_kv: en.base_kv,
            slack_voltage_pu: en.slack_voltage_pu,
            transformers: en.transformers.clone(),
        },
        gas: GasConfig {
            topology_csv: "gas_topology.csv".into(),
            citygate_node: gn.citygate_id(),
            properties: gn.properties,
            limits: gn.limits,
            initial_pressure_barg: scenario.initial_gas_pressure_barg,
        },
        plants_json: Some("plants.json".into()),
        cost_scenarios_json: Some("cost_scenarios.json".into()),
        profiles: ProfileSource::Files(ProfileFiles {
            electric_load_csv: names[0].into(),
            res_generation_csv: names[1].into(),
            gas_withdrawal_csv: names[2].into(),
        }),
    };
    let root_path = dir.join("scenario.json");
    write_json(&root_path, &root)?;
    Ok(root_path)
}
