//! Experiment plumbing behind the `pulsectl` binary: configuration, seeded
//! training runs with their artifacts, schedule replay and plot data.
//!
//! A training run directory contains:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | canonical config; `manifest.json` holds its SHA-256 |
//! | `metrics.jsonl` | one record per episode (TD) or iteration (PPO) |
//! | `episodes.jsonl` | one record per finished episode (PPO only) |
//! | `timing.jsonl` | wall-clock milliseconds per metrics record |
//! | `best_schedule.csv` | pulses of the best episode |
//! | `checkpoint.json` | trained networks |
//! | `manifest.json` | digest, version, timestamps, result summary |
//! | `*.tsv` | plot data, see [`export_plots`] |

mod config;
mod plots;
mod replay;
mod run;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::agents::AgentError;
use crate::env::{EnvError, ScheduleError};
use crate::nn::NnError;
use crate::sim::SimError;

pub use config::{
    digest_bytes, parse_config, parse_config_str, Algorithm, ExperimentConfig, DEFAULT_OUTPUT_DIR,
};
pub use plots::{export_plots, trailing_mean, PLOT_FILES};
pub use replay::{run_replay, sweep_constant, ReplayReport, SweepReport};
pub use run::{run_train, RunManifest, RunSummary, TOOLKIT_VERSION};

/// Overrides `output_dir` of `pulsectl train`.
pub const OUTPUT_DIR_ENV: &str = "PULSECTL_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid config: `{field}` {reason}")]
    Invalid { field: String, reason: String },
    #[error("serialization failed: {0}")]
    Serialize(String),
    #[error("output directory {0} already contains files; choose another or remove it")]
    OutputExists(PathBuf),
    #[error("run directory {dir} is missing {file}")]
    MissingArtifact { dir: PathBuf, file: &'static str },
    #[error("{file}:{line}: {message}")]
    Metrics {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config digest mismatch: manifest has {expected}, config.toml hashes to {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
