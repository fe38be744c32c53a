use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metasim::catalog;
use metasim::error::{CliError, Result};
use metasim::run::{run_scenario, write_json};
use metasim::scenario::{Scenario, SettingsSpec};
use metasim::sweep::{run_sweep, SweepSpec};
use metasim_core::{malthus_exponent, SolverSettings64};

/// Simulate metastatic populations under systemic inhibition of angiogenesis.
#[derive(Debug, Parser)]
#[command(name = "metasim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write CSV, JSON and SVG artifacts.
    Run {
        scenario: PathBuf,
        /// Output directory [default: out/<scenario name>]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Draw plots with a logarithmic y axis.
        #[arg(long)]
        log_scale: bool,
    },
    /// Run a one-parameter sweep and write summary.csv.
    Sweep {
        sweep: PathBuf,
        /// Output directory [default: out/sweep-<axis>]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Maximum concurrent runs; overrides the file's `parallelism`.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the built-in scenarios, or write them as scenario files.
    Catalog {
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Print the Malthus exponent of a scenario without inhibition (e = 0).
    Lambda0 { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            scenario,
            out,
            log_scale,
        } => {
            let mut sc = Scenario::load(&scenario)?.resolve()?;
            sc.outputs.log_scale |= log_scale;
            let out = out.unwrap_or_else(|| Path::new("out").join(&sc.name));
            let o = run_scenario(&sc, &out)?;
            println!(
                "{}: {} samples, {} peaks after t = {}, written to {}",
                sc.name,
                o.simulation.trajectory.len(),
                o.metrics.peaks.len(),
                sc.transient,
                out.display()
            );
            Ok(())
        }
        Command::Sweep { sweep, out, jobs } => {
            let spec = SweepSpec::load(&sweep)?;
            let out = out.unwrap_or_else(|| Path::new("out").join(format!("sweep-{}", spec.axis)));
            let rows = run_sweep(&spec, &out, jobs)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!(
                "{} runs ({failed} failed), summary in {}",
                rows.len(),
                out.join("summary.csv").display()
            );
            Ok(())
        }
        Command::Catalog { emit } => {
            let all = catalog::catalog();
            match emit {
                None => {
                    for sc in &all {
                        println!(
                            "{:<18} {}",
                            sc.name,
                            sc.description.as_deref().unwrap_or("")
                        );
                    }
                }
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    for sc in all {
                        let sc = with_explicit_settings(sc)?;
                        write_json(&dir.join(format!("{}.json", sc.name)), &sc)?;
                    }
                    println!(
                        "wrote {} scenarios to {}",
                        catalog::catalog().len(),
                        dir.display()
                    );
                }
            }
            Ok(())
        }
        Command::Lambda0 { scenario } => {
            let sc = Scenario::load(&scenario)?.resolve()?;
            let r = malthus_exponent(&sc.params)?;
            let text =
                serde_json::to_string_pretty(&r).map_err(|e| CliError::Config(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

/// Spells out every solver default so emitted files document them.
fn with_explicit_settings(mut sc: Scenario) -> Result<Scenario> {
    let r = sc.resolve()?;
    let SolverSettings64 {
        dt,
        t_end,
        sample_every,
        weight_floor,
    } = r.settings;
    sc.settings = SettingsSpec {
        dt: Some(dt),
        t_end: Some(t_end),
        sample_every: Some(sample_every),
        weight_floor: Some(weight_floor),
        transient: Some(r.transient),
        histogram_bins: Some(r.histogram_bins),
    };
    Ok(sc)
}
