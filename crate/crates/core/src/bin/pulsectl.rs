use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdgate::env::PulseSchedule;
use qdgate::harness::{
    export_plots, parse_config, run_replay, run_train, sweep_constant, HarnessError, OUTPUT_DIR_ENV,
};
use qdgate::sim::DeviceConstants;

/// Design CZ gates for a double quantum dot with reinforcement learning.
#[derive(Parser)]
#[command(name = "pulsectl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write a run directory.
    Train {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Re-simulate a pulse schedule and score it against CZ.
    Replay {
        schedule: PathBuf,
        /// Hold the first pulse for 1..=N ns and report the best duration.
        #[arg(long, value_name = "N")]
        sweep_duration: Option<usize>,
        /// Take the device constants from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the fidelity after every step.
        #[arg(long)]
        trace: bool,
    },
    /// Regenerate the plot TSVs of a finished run.
    ExportPlots { run_dir: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, output_dir } => {
            let mut cfg = parse_config(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let manifest = run_train(&cfg)?;
            let s = &manifest.summary;
            println!("run directory: {}", cfg.output_dir.display());
            println!("episodes: {}, converged: {}", s.episodes, s.converged);
            if let (Some(f), Some(d)) = (s.best_fidelity, s.best_duration_ns) {
                println!("best gate: fidelity {f:.6} in {d} ns");
            }
            if let Some(d) = s.shortest_success_ns {
                println!("shortest gate above the bonus threshold: {d} ns");
            }
        }
        Command::Replay {
            schedule,
            sweep_duration,
            config,
            trace,
        } => {
            let (constants, dt) = match config {
                Some(path) => {
                    let cfg = parse_config(&path)?;
                    (cfg.physics, cfg.env.dt_ns)
                }
                None => (DeviceConstants::default(), 1.0),
            };
            let schedule = PulseSchedule::read_csv(&schedule)?;
            match sweep_duration {
                Some(n) => {
                    let Some(&pulse) = schedule.records.first() else {
                        return Err(HarnessError::Invalid {
                            field: "schedule".into(),
                            reason: "sweep needs at least one pulse row".into(),
                        });
                    };
                    let sweep = sweep_constant(pulse, &constants, dt, n)?;
                    println!("duration_ns\tfidelity");
                    for (d, f) in &sweep.points {
                        println!("{d}\t{f}");
                    }
                    println!(
                        "peak: fidelity {:.6} at {} ns",
                        sweep.best_fidelity, sweep.best_duration_ns
                    );
                }
                None => {
                    let r = run_replay(&schedule, &constants, dt)?;
                    if trace {
                        println!("step\tfidelity");
                        for (k, f) in r.trace.iter().enumerate() {
                            println!("{k}\t{f}");
                        }
                    }
                    println!(
                        "fidelity {} over {} ns (compensated: {})",
                        r.report.fidelity,
                        schedule.len() as f64 * dt,
                        r.compensated
                    );
                }
            }
        }
        Command::ExportPlots { run_dir } => {
            for path in export_plots(&run_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            println!(
                "ok: {} (seed {}), digest {}",
                cfg.algorithm,
                cfg.seed,
                cfg.digest()?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
