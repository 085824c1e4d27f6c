//! Learning algorithms: deep Q-learning and deep SARSA over the discrete
//! action set, and PPO with GAE and parallel rollouts over continuous
//! actions.

mod ppo;
mod td;

use serde::Serialize;
use thiserror::Error;

use crate::env::{EnvError, PulseSchedule};
use crate::nn::NnError;

pub use ppo::{
    gae, normalize_advantages, ppo_loss, train_ppo, EpisodeEnd, GaussianPolicy, IterationStats,
    PpoConfig, PpoGradients, PpoLoss, PpoOutcome, PpoSample, StopCriterion, Trajectory, Transition,
};
pub use td::{
    epsilon_greedy, epsilon_schedule, td_target_qlearning, td_target_sarsa, train_td, ReplayConfig,
    TdAlgorithm, TdConfig, TdOutcome,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid agent config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("network expects {expected} inputs but observations have {got}")]
    ObservationSize { expected: usize, got: usize },
    #[error("sample {index}: probability ratio is not finite (logp_new = {logp_new}, logp_old = {logp_old})")]
    NonFiniteRatio {
        index: usize,
        logp_new: f64,
        logp_old: f64,
    },
    #[error("trajectory ends mid-episode without a bootstrap value")]
    MissingBootstrap,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("rollout worker {worker} failed in iteration {iteration}: {message}")]
    Worker {
        worker: usize,
        iteration: usize,
        message: String,
    },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> AgentError {
    AgentError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// SplitMix64 mix of a base seed with a stream and index, so independent
/// random streams never depend on execution order.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One finished episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub episode: usize,
    /// PPO iteration and worker that produced the episode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worker: Option<usize>,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub final_fidelity: f64,
    /// Highest final fidelity over this and all earlier episodes.
    pub best_fidelity: f64,
    pub gate_duration_ns: f64,
    pub steps: usize,
    pub terminated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_loss: Option<f64>,
    /// Wall-clock time; kept out of the deterministic metrics stream.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// The most useful episode seen so far, with the pulses that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestEpisode {
    pub episode: usize,
    pub fidelity: f64,
    pub duration_ns: f64,
    pub terminated: bool,
    #[serde(skip)]
    pub schedule: PulseSchedule,
}

impl BestEpisode {
    fn tier(&self, f_bonus: f64) -> u8 {
        match (self.terminated, self.fidelity > f_bonus) {
            (true, true) => 2,
            (true, false) => 1,
            _ => 0,
        }
    }

    /// Bonus-tier successes beat plain successes, which beat failures.
    /// Among bonus-tier gates the shorter wins; otherwise the higher
    /// fidelity wins.
    pub fn improves_on(&self, other: &BestEpisode, f_bonus: f64) -> bool {
        let (a, b) = (self.tier(f_bonus), other.tier(f_bonus));
        if a != b {
            return a > b;
        }
        if a == 2 {
            if self.duration_ns != other.duration_ns {
                return self.duration_ns < other.duration_ns;
            }
            return self.fidelity > other.fidelity;
        }
        if self.fidelity != other.fidelity {
            return self.fidelity > other.fidelity;
        }
        self.duration_ns < other.duration_ns
    }

    pub fn is_bonus_success(&self, f_bonus: f64) -> bool {
        self.tier(f_bonus) == 2
    }
}

/// Running best-episode and best-fidelity bookkeeping.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tracker {
    pub best: Option<BestEpisode>,
    pub best_fidelity: f64,
    pub shortest_success_ns: Option<f64>,
}

impl Tracker {
    pub fn observe(&mut self, candidate: BestEpisode, f_bonus: f64) {
        self.best_fidelity = self.best_fidelity.max(candidate.fidelity);
        if candidate.is_bonus_success(f_bonus) {
            let d = candidate.duration_ns;
            self.shortest_success_ns = Some(self.shortest_success_ns.map_or(d, |s| s.min(d)));
        }
        let replace = match &self.best {
            None => true,
            Some(b) => candidate.improves_on(b, f_bonus),
        };
        if replace {
            self.best = Some(candidate);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(fidelity: f64, duration_ns: f64, terminated: bool) -> BestEpisode {
        BestEpisode {
            episode: 0,
            fidelity,
            duration_ns,
            terminated,
            schedule: PulseSchedule::default(),
        }
    }

    #[test]
    fn ranking() {
        let fb = 0.999;
        assert!(ep(0.9992, 40.0, true).improves_on(&ep(0.995, 10.0, true), fb));
        assert!(ep(0.9991, 12.0, true).improves_on(&ep(0.9999, 20.0, true), fb));
        assert!(ep(0.995, 30.0, true).improves_on(&ep(0.99, 10.0, true), fb));
        assert!(ep(0.991, 200.0, true).improves_on(&ep(0.98, 200.0, false), fb));
        assert!(!ep(0.995, 30.0, true).improves_on(&ep(0.995, 30.0, true), fb));
    }

    #[test]
    fn tracker_keeps_shortest_success() {
        let mut t = Tracker::default();
        t.observe(ep(0.9995, 20.0, true), 0.999);
        t.observe(ep(0.9993, 14.0, true), 0.999);
        t.observe(ep(0.9999, 30.0, true), 0.999);
        assert_eq!(t.shortest_success_ns, Some(14.0));
        assert_eq!(t.best_fidelity, 0.9999);
        assert_eq!(t.best.as_ref().unwrap().duration_ns, 14.0);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 2, 3);
        assert_eq!(a, derive_seed(1, 2, 3));
        assert_ne!(a, derive_seed(1, 2, 4));
        assert_ne!(a, derive_seed(1, 3, 3));
        assert_ne!(a, derive_seed(2, 2, 3));
    }
}
