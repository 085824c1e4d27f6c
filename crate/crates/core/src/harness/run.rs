use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{digest_bytes, Algorithm, ExperimentConfig};
use super::plots::export_plots;
use super::replay::run_replay;
use super::{io_err, HarnessError};
use crate::agents::{train_ppo, train_td, BestEpisode};
use crate::env::GateEnv;
use crate::nn::Checkpoint;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub episodes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    /// TD: trailing-mean target reached. PPO: stop criterion met.
    pub converged: bool,
    pub best_fidelity: Option<f64>,
    pub best_duration_ns: Option<f64>,
    pub best_episode: Option<usize>,
    /// Shortest terminated gate above the bonus threshold.
    pub shortest_success_ns: Option<f64>,
    /// Fidelity of `best_schedule.csv` re-simulated from scratch.
    pub replay_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// SHA-256 of `config.toml` as written.
    pub config_digest: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub summary: RunSummary,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self, HarnessError> {
        let path = run_dir.join("manifest.json");
        if !path.exists() {
            return Err(HarnessError::MissingArtifact {
                dir: run_dir.to_path_buf(),
                file: "manifest.json",
            });
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            origin: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Checks that `config.toml` in `run_dir` still hashes to the recorded digest.
    pub fn verify(&self, run_dir: &Path) -> Result<(), HarnessError> {
        let path = run_dir.join("config.toml");
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let actual = digest_bytes(&bytes);
        if actual != self.config_digest {
            return Err(HarnessError::DigestMismatch {
                expected: self.config_digest.clone(),
                actual,
            });
        }
        Ok(())
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn write_file(
    dir: &Path,
    name: &str,
    contents: &[u8],
    files: &mut Vec<String>,
) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    files.push(name.to_string());
    Ok(())
}

fn jsonl<T: Serialize>(records: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| HarnessError::Serialize(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct Timing {
    index: usize,
    wall_ms: f64,
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        if entries.next().is_some() {
            return Err(HarnessError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Validates `cfg`, trains the selected agent and writes the run directory
/// at `cfg.output_dir`, which must be absent or empty.
///
/// Nothing is created on disk when validation fails.
pub fn run_train(cfg: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    cfg.validate()?;
    let config_text = cfg.to_toml_string()?;
    let dir = cfg.output_dir.clone();
    prepare_dir(&dir)?;
    let started_unix_ms = unix_ms();
    let mut files = Vec::new();
    write_file(&dir, "config.toml", config_text.as_bytes(), &mut files)?;
    let env_config = cfg.env_config();

    let (best, mut summary): (Option<BestEpisode>, RunSummary) = match cfg.algorithm.td() {
        Some(algo) => {
            let mut env = GateEnv::new(env_config.clone())?;
            let out = train_td(&mut env, algo, &cfg.td_config(), cfg.seed)?;
            write_file(&dir, "metrics.jsonl", &jsonl(&out.episodes)?, &mut files)?;
            let timing: Vec<Timing> = out
                .episodes
                .iter()
                .map(|e| Timing {
                    index: e.episode,
                    wall_ms: e.wall_ms,
                })
                .collect();
            write_file(&dir, "timing.jsonl", &jsonl(&timing)?, &mut files)?;
            let ckpt = Checkpoint::new().with_network("q", &out.network);
            write_file(
                &dir,
                "checkpoint.json",
                ckpt.to_json().as_bytes(),
                &mut files,
            )?;
            let shortest = out
                .episodes
                .iter()
                .filter(|e| e.terminated && e.final_fidelity > env_config.f_bonus)
                .map(|e| e.gate_duration_ns)
                .reduce(f64::min);
            let summary = RunSummary {
                episodes: out.episodes.len(),
                iterations: None,
                converged: out.converged,
                best_fidelity: None,
                best_duration_ns: None,
                best_episode: None,
                shortest_success_ns: shortest,
                replay_fidelity: None,
            };
            (out.best, summary)
        }
        None => {
            let out = train_ppo(&env_config, &cfg.ppo_config(), cfg.seed)?;
            write_file(&dir, "metrics.jsonl", &jsonl(&out.iterations)?, &mut files)?;
            write_file(&dir, "episodes.jsonl", &jsonl(&out.episodes)?, &mut files)?;
            let timing: Vec<Timing> = out
                .iterations
                .iter()
                .map(|i| Timing {
                    index: i.iteration,
                    wall_ms: i.wall_ms,
                })
                .collect();
            write_file(&dir, "timing.jsonl", &jsonl(&timing)?, &mut files)?;
            let ckpt = Checkpoint::new()
                .with_network("policy", &out.policy.net)
                .with_vector("log_std", &out.policy.log_std)
                .with_network("value", &out.value);
            write_file(
                &dir,
                "checkpoint.json",
                ckpt.to_json().as_bytes(),
                &mut files,
            )?;
            let summary = RunSummary {
                episodes: out.episodes.len(),
                iterations: Some(out.iterations.len()),
                converged: out.stopped_early,
                best_fidelity: None,
                best_duration_ns: None,
                best_episode: None,
                shortest_success_ns: out.iterations.last().and_then(|i| i.shortest_success_ns),
                replay_fidelity: None,
            };
            (out.best, summary)
        }
    };

    if let Some(b) = &best {
        write_file(
            &dir,
            "best_schedule.csv",
            b.schedule.to_csv_string().as_bytes(),
            &mut files,
        )?;
        let replay = run_replay(&b.schedule, &cfg.physics, env_config.dt_ns)?;
        summary.best_fidelity = Some(b.fidelity);
        summary.best_duration_ns = Some(b.duration_ns);
        summary.best_episode = Some(b.episode);
        summary.replay_fidelity = Some(replay.report.fidelity);
    }

    for path in export_plots(&dir)? {
        if let Some(name) = path.file_name() {
            files.push(name.to_string_lossy().into_owned());
        }
    }

    let mut manifest = RunManifest {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        config_digest: digest_bytes(config_text.as_bytes()),
        started_unix_ms,
        finished_unix_ms: 0,
        summary,
        files,
    };
    manifest.finished_unix_ms = unix_ms();
    let path = dir.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| HarnessError::Serialize(e.to_string()))?;
    writeln!(f, "{text}").map_err(io_err(&path))?;
    Ok(manifest)
}
