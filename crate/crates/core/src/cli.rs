//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use crate::config::{load_scenario_config, ScenarioConfig};
use crate::error::ConfigError;
use crate::io::{run, OutputWriter};
use crate::kgd::KgdComparison;
use crate::scenarios::{build_scenario, list_scenarios, BUILTIN_NAMES};
use crate::solver::Simulation;

#[derive(Debug, Parser)]
#[command(name = "periporo", version, about = "Peridynamic crack branching in unsaturated porous media")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario to its end time.
    Run {
        /// Scenario file, or the name of a built-in deck.
        config: String,
        /// Output directory (overrides output.directory).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Snapshot cadence in steps (0: first and last only).
        #[arg(long)]
        every: Option<u64>,
    },
    /// Run an injection deck and compare it with the similarity solution.
    ValidateKgd {
        /// Scenario file, or the name of a built-in deck.
        config: String,
        /// Largest accepted relative error of pressure and mouth width.
        #[arg(long, default_value_t = 0.2)]
        tolerance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print every built-in deck with the provenance of each value.
    ListScenarios,
}

/// Loads a scenario file or expands a built-in name.
pub fn resolve_config(arg: &str) -> Result<ScenarioConfig, String> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
        return load_scenario_config(&text).map_err(|e| format!("{arg}: {e}"));
    }
    if BUILTIN_NAMES.contains(&arg) {
        return build_scenario(arg, &Default::default()).map_err(|e| e.to_string());
    }
    Err(format!(
        "{arg}: no such file and not a built-in scenario ({})",
        BUILTIN_NAMES.join(", ")
    ))
}

fn simulate(
    config: ScenarioConfig,
    output: Option<PathBuf>,
    every: Option<u64>,
) -> Result<(Simulation, Vec<crate::io::TimeseriesRecord>), String> {
    let mut config = config;
    if let Some(n) = every {
        config.output.every_n_steps = n;
    }
    if output.is_some() {
        config.output.directory = output;
    }
    let mut sim = Simulation::new(config).map_err(|e: ConfigError| e.to_string())?;
    info!(
        "{}: {} points, {} bonds, {} steps",
        sim.config.name,
        sim.points.len(),
        sim.table().bond_count(),
        sim.config.steps()
    );
    let dir = sim.config.output.directory.clone();
    let every_ts = sim.config.output.timeseries_every_n_steps;
    let mut writer = match &dir {
        Some(d) => Some(OutputWriter::create(d, &sim).map_err(|e| format!("{}: {e}", d.display()))?),
        None => None,
    };
    let series = run(&mut sim, writer.as_mut(), every_ts, |r| {
        info!(
            "t = {:.4e} s  L = {:.4} m  w = {:.3e} m  pf = {:.4} MPa  branches = {}  broken = {}",
            r.time, r.length, r.mouth_width, r.pf_mpa, r.branches, r.broken_bonds
        )
    })
    .map_err(|e| e.to_string())?;
    if let Some(w) = writer {
        let p = w.finish(&sim).map_err(|e| e.to_string())?;
        println!("timeseries written to {}", p.display());
    }
    Ok((sim, series))
}

/// Entry point used by the binary.
pub fn main_with(args: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::ListScenarios => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            output,
            every,
        } => {
            let cfg = match resolve_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match simulate(cfg, output, every) {
                Ok((sim, series)) => {
                    if let Some(r) = series.last() {
                        println!(
                            "{}: t = {:e} s, length {:.4} m, branches {}, broken bonds {}",
                            sim.config.name, r.time, r.length, r.branches, r.broken_bonds
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::ValidateKgd {
            config,
            tolerance,
            output,
        } => {
            let cfg = match resolve_config(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if cfg.bc.injection_rate_m2_s <= 0.0 {
                return fail(&format!("{config}: deck has no injection"));
            }
            match simulate(cfg, output, None) {
                Ok((sim, series)) => {
                    let cmp = KgdComparison::new(&sim.config, &series, 0.1);
                    print!("{}", cmp.table());
                    let worst = cmp.max_width_error().max(cmp.max_pressure_error());
                    if cmp.rows.is_empty() || worst > tolerance {
                        println!("FAIL: largest error {worst:.3} exceeds tolerance {tolerance}");
                        ExitCode::FAILURE
                    } else {
                        println!("PASS: largest error {worst:.3} within tolerance {tolerance}");
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(&e),
            }
        }
    }
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}
