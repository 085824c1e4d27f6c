use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agents::{PpoConfig, TdAlgorithm, TdConfig};
use crate::env::EnvConfig;
use crate::sim::DeviceConstants;

pub const DEFAULT_OUTPUT_DIR: &str = "runs/latest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    QLearning,
    Sarsa,
    Ppo,
}

impl Algorithm {
    pub const NAMES: [&'static str; 3] = ["qlearning", "sarsa", "ppo"];

    fn parse(name: &str) -> Option<Self> {
        match name {
            "qlearning" => Some(Self::QLearning),
            "sarsa" => Some(Self::Sarsa),
            "ppo" => Some(Self::Ppo),
            _ => None,
        }
    }

    pub fn td(self) -> Option<TdAlgorithm> {
        match self {
            Self::QLearning => Some(TdAlgorithm::QLearning),
            Self::Sarsa => Some(TdAlgorithm::Sarsa),
            Self::Ppo => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as usize;
        f.write_str(Self::NAMES[i])
    }
}

/// One training experiment.
///
/// In TOML:
///
/// ```toml
/// algorithm = "ppo"        # qlearning | sarsa | ppo
/// seed = 1
/// output_dir = "runs/ppo-1"
///
/// [physics]                # Coulomb and Zeeman constants, GHz
/// u = [845.2, 845.2]
///
/// [env]                    # any environment field, e.g. max_steps = 200
///
/// [ppo]                    # or [td] for qlearning / sarsa
/// n_envs = 8
/// ```
///
/// Every section is optional and falls back to defaults; unknown keys are
/// rejected, as is a `[td]` section in a PPO experiment and vice versa.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub physics: DeviceConstants,
    pub env: EnvConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub td: Option<TdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ppo: Option<PpoConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    algorithm: Option<String>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    physics: DeviceConstants,
    #[serde(default)]
    env: EnvConfig,
    td: Option<TdConfig>,
    ppo: Option<PpoConfig>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Defaults for `algorithm`, with the matching algorithm section filled in.
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        let (td, ppo) = match algorithm {
            Algorithm::Ppo => (None, Some(PpoConfig::default())),
            _ => (Some(TdConfig::default()), None),
        };
        Self {
            algorithm,
            seed,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            physics: DeviceConstants::default(),
            env: EnvConfig::default(),
            td,
            ppo,
        }
    }

    /// Environment config with the physics constants applied.
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            constants: self.physics,
            ..self.env.clone()
        }
    }

    pub fn td_config(&self) -> TdConfig {
        self.td.clone().unwrap_or_default()
    }

    pub fn ppo_config(&self) -> PpoConfig {
        self.ppo.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.physics
            .validate()
            .map_err(|e| invalid("physics", e.to_string()))?;
        self.env_config()
            .validate()
            .map_err(|e| invalid("env", e.to_string()))?;
        match self.algorithm {
            Algorithm::Ppo => {
                if self.td.is_some() {
                    return Err(invalid(
                        "td",
                        "section not allowed when algorithm = \"ppo\"",
                    ));
                }
                self.ppo_config()
                    .validate()
                    .map_err(|e| invalid("ppo", e.to_string()))?;
            }
            _ => {
                if self.ppo.is_some() {
                    return Err(invalid(
                        "ppo",
                        format!(
                            "section not allowed when algorithm = \"{}\"",
                            self.algorithm
                        ),
                    ));
                }
                self.td_config()
                    .validate()
                    .map_err(|e| invalid("td", e.to_string()))?;
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Canonical TOML text; the run digest is computed over these bytes.
    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Serialize(e.to_string()))
    }

    /// Hex SHA-256 of [`Self::to_toml_string`].
    pub fn digest(&self) -> Result<String, HarnessError> {
        Ok(digest_bytes(self.to_toml_string()?.as_bytes()))
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses and validates an experiment from TOML text. `origin` names the
/// source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<ExperimentConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    let algorithm = match raw.algorithm.as_deref().map(str::trim) {
        None | Some("") => {
            return Err(invalid(
                "algorithm",
                format!(
                    "is required; expected one of {}",
                    Algorithm::NAMES.join(", ")
                ),
            ))
        }
        Some(name) => Algorithm::parse(name).ok_or_else(|| {
            invalid(
                "algorithm",
                format!(
                    "unknown value `{name}`; expected one of {}",
                    Algorithm::NAMES.join(", ")
                ),
            )
        })?,
    };
    let seed = raw.seed.ok_or_else(|| invalid("seed", "is required"))?;
    let mut cfg = ExperimentConfig::new(algorithm, seed);
    cfg.physics = raw.physics;
    cfg.env = raw.env;
    if let Some(dir) = raw.output_dir {
        cfg.output_dir = dir;
    }
    // Keep whichever section was given, so a mismatched one is reported.
    if raw.td.is_some() || raw.ppo.is_some() {
        cfg.td = raw.td;
        cfg.ppo = raw.ppo;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}
