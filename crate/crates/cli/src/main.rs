use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use p2gsim_core::economics::{sensitivity_sweep, CostScenario, PlantEconomics, SWEEP_SURPLUS_PRICES};
use p2gsim_core::scenario::{load_gas_validation, load_scenario_with_seed, save_scenario};
use p2gsim_core::sim::{check_invariants, emit_reports, run, validate_gas_model, Period, Tolerances, ValidationOptions};

#[derive(Parser)]
#[command(name = "p2gsim", version, about = "Electricity/gas distribution co-simulation with power-to-gas plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Year {
    #[value(name = "2030")]
    Y2030,
    #[value(name = "2050")]
    Y2050,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full simulation and write reports.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// First step of the simulated window.
        #[arg(long, default_value_t = 0)]
        first_step: usize,
        /// Number of steps to simulate; the rest of the grid when absent.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Compare the transient gas model with the steady-state solution.
    ValidateGas {
        #[arg(short, long)]
        config: PathBuf,
        /// Largest accepted relative pressure error.
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// Levelized cost of SNG from a run's plant_economics.json.
    Lcoe {
        #[arg(short, long)]
        economics: PathBuf,
        /// Cost scenario JSON; the built-in 2030/2050 presets when absent.
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        year: Year,
        /// Evaluate a single surplus electricity price (€/MWh) instead of the sweep.
        #[arg(long)]
        surplus_price: Option<f64>,
        /// Write the table as CSV here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the synthetic profiles of a scenario and save it with CSV profiles.
    Synth {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seed, first_step, steps } => cmd_run(config, out, seed, first_step, steps),
        Command::ValidateGas { config, tolerance } => {
            let case = load_gas_validation(&config)?;
            let t0 = Instant::now();
            let v = validate_gas_model(
                &case.network,
                &case.withdrawals_kg_per_s,
                &vec![0.0; case.network.node_count()],
                &ValidationOptions::default(),
            )
            .context("gas model validation failed")?;
            println!(
                "nodes {}  steps {}  stationary {}  max relative error {:.3e} at node {}  ({:.2?})",
                case.network.node_count(),
                v.steps,
                v.stationary,
                v.max_relative_error,
                v.worst_node,
                t0.elapsed()
            );
            if v.max_relative_error < tolerance {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("relative error above {tolerance}");
                Ok(ExitCode::from(2))
            }
        }
        Command::Lcoe { economics, costs, year, surplus_price, out } => {
            let text = fs::read_to_string(&economics).with_context(|| format!("reading {}", economics.display()))?;
            let plants: Vec<PlantEconomics> =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", economics.display()))?;
            let mut scenarios: Vec<CostScenario> = match costs {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => vec![CostScenario::preset_2030(), CostScenario::preset_2050()],
            };
            match year {
                Year::Y2030 => scenarios.retain(|s| s.year_label == 2030),
                Year::Y2050 => scenarios.retain(|s| s.year_label == 2050),
                Year::All => {}
            }
            if scenarios.is_empty() {
                bail!("no cost scenario for the requested year");
            }
            let prices = surplus_price.map_or(SWEEP_SURPLUS_PRICES.to_vec(), |p| vec![p]);
            let rows = sensitivity_sweep(&plants, &scenarios, &prices);
            let mut table = String::from("plant,year,surplus_price_eur_per_mwh,lc_sng_eur_per_mwh,lc_sng_without_byproducts_eur_per_mwh,byproduct_reduction_pct\n");
            for r in &rows {
                table.push_str(&format!(
                    "{},{},{},{:.2},{:.2},{:.1}\n",
                    r.plant,
                    r.year_label,
                    r.surplus_price_eur_per_mwh,
                    r.lc_sng_eur_per_mwh,
                    r.lc_sng_without_byproducts_eur_per_mwh,
                    100.0 * r.byproduct_reduction()
                ));
            }
            match out {
                Some(p) => fs::write(&p, table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { config, out, seed } => {
            let scenario = load_scenario_with_seed(&config, seed)?;
            let root = save_scenario(&scenario, &out)?;
            println!("wrote {}", root.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(config: PathBuf, out: PathBuf, seed: Option<u64>, first_step: usize, steps: Option<usize>) -> Result<ExitCode> {
    let mut scenario = load_scenario_with_seed(&config, seed)?;
    if first_step > 0 || steps.is_some() {
        let count = steps.unwrap_or(scenario.time_grid.step_count.saturating_sub(first_step));
        scenario = scenario.window(first_step, count)?;
    }
    let t0 = Instant::now();
    let result = run(&scenario)?;
    let elapsed = t0.elapsed();
    emit_reports(&result, &out)?;

    println!("{}: {} steps in {:.2?}", result.meta.scenario_name, result.records.len(), elapsed);
    for row in result.seasonal.electric.iter().filter(|r| r.period == Period::WholeYear) {
        println!(
            "  TR{}  surplus {:8.1} MWh  absorbed {:8.1} MWh  rpf {:8.1} MWh",
            row.transformer, row.surplus_mwh, row.absorbed_mwh, row.rpf_mwh
        );
    }
    for row in result.seasonal.plants.iter().filter(|r| r.period == Period::WholeYear) {
        println!(
            "  {}  electricity {:8.1} MWh  SNG {:8.1} MWh  full-load hours {:6.0}",
            row.plant, row.electricity_mwh, row.sng_mwh, row.electrolyzer_full_load_hours
        );
    }
    for row in result.seasonal.gas.iter() {
        println!(
            "  gas {:<11}  demand {:8.1} MWh  imported {:8.1} MWh  SNG {:7.1} MWh ({:.1}%)",
            row.period.label(),
            row.ng_demand_mwh,
            row.ng_imported_mwh,
            row.sng_mwh,
            row.sng_share_pct
        );
    }
    println!("  reports in {}", out.display());

    let violations = check_invariants(&result, &Tolerances::default());
    if violations.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} invariant violation(s):", violations.len());
    for v in violations.iter().take(20) {
        eprintln!("  {v}");
    }
    Ok(ExitCode::from(3))
}
