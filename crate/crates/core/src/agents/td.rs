use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, invalid, AgentError, BestEpisode, EpisodeStats, Tracker};
use crate::env::{GateEnv, N_ACTIONS};
use crate::nn::{init_mlp, mse_loss, Adam, AdamConfig, Gradients, Mlp};

const RNG_STREAM_POLICY: u64 = 1;
const RNG_STREAM_INIT: u64 = 2;
const RNG_STREAM_RESET: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TdAlgorithm {
    /// Off-policy: bootstrap from the greedy next action.
    QLearning,
    /// On-policy: bootstrap from the ε-greedy next action actually taken.
    Sarsa,
}

/// Experience replay; off by default, updates are purely online.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdConfig {
    /// Mixing coefficient of the regression target:
    /// `(1 − alpha)·Q(s,a) + alpha·y`.
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_init: f64,
    /// Per-episode multiplier.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub episodes_max: usize,
    /// Training stops once the trailing-window mean final fidelity exceeds this.
    pub target_mean_fidelity: f64,
    pub window: usize,
    pub adam: AdamConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplayConfig>,
    /// Copy the online network into a frozen target network every this many
    /// updates; `None` bootstraps from the online network.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_sync_steps: Option<usize>,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon_init: 1.0,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            episodes_max: 5000,
            target_mean_fidelity: 0.99,
            window: 10,
            adam: AdamConfig::default(),
            replay: None,
            target_sync_steps: None,
        }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_init) {
            return Err(invalid("epsilon_init", "must lie in [0, 1]"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(invalid("epsilon_decay", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err(invalid("epsilon_min", "must lie in [0, 1]"));
        }
        if self.episodes_max == 0 {
            return Err(invalid("episodes_max", "must be at least 1"));
        }
        if self.window == 0 {
            return Err(invalid("window", "must be at least 1"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(invalid("adam.lr", "must be positive"));
        }
        if let Some(r) = self.replay {
            if r.batch_size == 0 || r.capacity < r.batch_size {
                return Err(invalid("replay", "needs 0 < batch_size <= capacity"));
            }
        }
        if self.target_sync_steps == Some(0) {
            return Err(invalid("target_sync_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Exploration rate used during episode `k` (0-based).
pub fn epsilon_schedule(cfg: &TdConfig, k: usize) -> f64 {
    (cfg.epsilon_init * cfg.epsilon_decay.powi(k as i32)).max(cfg.epsilon_min)
}

/// Uniform random action with probability `eps`, otherwise the argmax with
/// the lowest index winning ties.
pub fn epsilon_greedy<R: Rng + ?Sized>(qvalues: &[f64], eps: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < eps {
        return rng.random_range(0..qvalues.len());
    }
    argmax(qvalues)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

pub fn td_target_qlearning(reward: f64, gamma: f64, q_next: &[f64], done: bool) -> f64 {
    if done {
        return reward;
    }
    reward + gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn td_target_sarsa(reward: f64, gamma: f64, q_next_at_action: f64, done: bool) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q_next_at_action
    }
}

#[derive(Debug, Clone)]
pub struct TdOutcome {
    pub network: Mlp,
    pub episodes: Vec<EpisodeStats>,
    pub best: Option<BestEpisode>,
    /// Exploration rate after the last episode.
    pub final_epsilon: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Transition {
    obs: Vec<f64>,
    action: usize,
    reward: f64,
    next_obs: Vec<f64>,
    next_action: usize,
    terminated: bool,
}

struct Learner<'a> {
    algo: TdAlgorithm,
    cfg: &'a TdConfig,
    q: Mlp,
    target: Option<Mlp>,
    adam: Adam,
    updates: usize,
}

impl Learner<'_> {
    fn bootstrap_net(&self) -> &Mlp {
        self.target.as_ref().unwrap_or(&self.q)
    }

    fn target_value(&self, t: &Transition, q_next: &[f64]) -> f64 {
        match self.algo {
            TdAlgorithm::QLearning => {
                td_target_qlearning(t.reward, self.cfg.gamma, q_next, t.terminated)
            }
            TdAlgorithm::Sarsa => td_target_sarsa(
                t.reward,
                self.cfg.gamma,
                q_next[t.next_action],
                t.terminated,
            ),
        }
    }

    /// One Adam step on the mean MSE over `batch`; returns the mean loss.
    fn update(&mut self, batch: &[&Transition]) -> Result<f64, AgentError> {
        let mut grads = Gradients::zeros_like(&self.q);
        let mut total_loss = 0.0;
        for t in batch {
            let q_next = self.bootstrap_net().predict(&t.next_obs)?;
            let y = self.target_value(t, &q_next);
            let (q, cache) = self.q.forward(&t.obs)?;
            let mut regress_to = q.clone();
            regress_to[t.action] = (1.0 - self.cfg.alpha) * q[t.action] + self.cfg.alpha * y;
            let (loss, dl_dq) = mse_loss(&q, &regress_to)?;
            total_loss += loss;
            grads.add_assign(&self.q.backward(&cache, &dl_dq)?);
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        self.adam.step(self.q.params_mut(), &grads.params)?;
        self.updates += 1;
        if let Some(every) = self.cfg.target_sync_steps {
            if self.updates.is_multiple_of(every) {
                self.target = Some(self.q.clone());
            }
        }
        Ok(total_loss / n)
    }
}

/// Trains a Q-network online on the discrete-action environment.
///
/// The exploration rate decays once per episode. Training stops after
/// `episodes_max` episodes or once the mean final fidelity over the last
/// `window` episodes exceeds `target_mean_fidelity`.
pub fn train_td(
    env: &mut GateEnv,
    algo: TdAlgorithm,
    cfg: &TdConfig,
    seed: u64,
) -> Result<TdOutcome, AgentError> {
    cfg.validate()?;
    let obs_len = env.observation_len();
    let q = init_mlp(obs_len, N_ACTIONS, derive_seed(seed, RNG_STREAM_INIT, 0))?;
    let n_params = q.params().len();
    let mut learner = Learner {
        algo,
        cfg,
        target: cfg.target_sync_steps.map(|_| q.clone()),
        q,
        adam: Adam::new(cfg.adam, n_params),
        updates: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, RNG_STREAM_POLICY, 0));
    let mut replay: VecDeque<Transition> = VecDeque::new();
    let f_bonus = env.config().f_bonus;

    let mut episodes = Vec::new();
    let mut tracker = Tracker::default();
    let mut converged = false;

    for k in 0..cfg.episodes_max {
        let started = Instant::now();
        let eps = epsilon_schedule(cfg, k);
        let mut obs = env.reset(derive_seed(seed, RNG_STREAM_RESET, k as u64));
        if obs.features.len() != learner.q.input_dim() {
            return Err(AgentError::ObservationSize {
                expected: learner.q.input_dim(),
                got: obs.features.len(),
            });
        }
        let mut action = epsilon_greedy(&learner.q.predict(&obs.features)?, eps, &mut rng);
        let mut episode_return = 0.0;
        let mut losses = 0.0;
        let mut n_updates = 0usize;

        let last = loop {
            let step = env.step_discrete(action)?;
            episode_return += step.reward;
            let next_q = learner.q.predict(&step.observation.features)?;
            let next_action = epsilon_greedy(&next_q, eps, &mut rng);
            let transition = Transition {
                obs: std::mem::take(&mut obs.features),
                action,
                reward: step.reward,
                next_obs: step.observation.features.clone(),
                next_action,
                terminated: step.terminated,
            };

            match cfg.replay {
                None => {
                    losses += learner.update(&[&transition])?;
                    n_updates += 1;
                }
                Some(rc) => {
                    if replay.len() == rc.capacity {
                        replay.pop_front();
                    }
                    replay.push_back(transition);
                    if replay.len() >= rc.batch_size {
                        let batch: Vec<&Transition> = (0..rc.batch_size)
                            .map(|_| &replay[rng.random_range(0..replay.len())])
                            .collect();
                        losses += learner.update(&batch)?;
                        n_updates += 1;
                    }
                }
            }

            if step.done() {
                break step;
            }
            obs = step.observation;
            action = match algo {
                TdAlgorithm::Sarsa => next_action,
                // Greedy-or-explore on the updated network.
                TdAlgorithm::QLearning => {
                    epsilon_greedy(&learner.q.predict(&obs.features)?, eps, &mut rng)
                }
            };
        };

        let fidelity = last.info.fidelity;
        tracker.observe(
            BestEpisode {
                episode: k,
                fidelity,
                duration_ns: last.info.gate_duration_ns,
                terminated: last.terminated,
                schedule: env.export_schedule(),
            },
            f_bonus,
        );
        episodes.push(EpisodeStats {
            seed,
            episode: k,
            iteration: None,
            worker: None,
            episode_return,
            final_fidelity: fidelity,
            best_fidelity: tracker.best_fidelity,
            gate_duration_ns: last.info.gate_duration_ns,
            steps: env.steps(),
            terminated: last.terminated,
            epsilon: Some(eps),
            mean_loss: (n_updates > 0).then(|| losses / n_updates as f64),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });

        if episodes.len() >= cfg.window {
            let tail = &episodes[episodes.len() - cfg.window..];
            let mean = tail.iter().map(|e| e.final_fidelity).sum::<f64>() / cfg.window as f64;
            if mean > cfg.target_mean_fidelity {
                converged = true;
                break;
            }
        }
    }

    Ok(TdOutcome {
        network: learner.q,
        final_epsilon: epsilon_schedule(cfg, episodes.len()),
        episodes,
        best: tracker.best,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;

    #[test]
    fn greedy_picks_argmax_with_low_index_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut q = vec![0.0; 27];
        q[26] = 5.0;
        assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), 26);
        let mut q = vec![0.0; 27];
        q[3] = 1.0;
        q[7] = 1.0;
        assert_eq!(epsilon_greedy(&q, 0.0, &mut rng), 3);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let q = vec![0.0; 27];
        let mut counts = [0usize; 27];
        let n = 100_000;
        for _ in 0..n {
            counts[epsilon_greedy(&q, 1.0, &mut rng)] += 1;
        }
        let expected = n as f64 / 27.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 26 degrees of freedom: the 0.999 quantile is about 54.1
        assert!(chi2 < 54.1, "chi2 = {chi2}");
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 27.0).abs() < 0.01);
        }
    }

    #[test]
    fn target_examples() {
        assert_eq!(td_target_qlearning(498.75, 0.9, &[1.0, 2.0], true), 498.75);
        let mut q = vec![0.0; 27];
        q[4] = 10.0;
        assert!((td_target_qlearning(-1.0, 0.9, &q, false) - 8.0).abs() < 1e-12);
        assert!((td_target_qlearning(0.0, 0.9, &[3.0; 27], false) - 2.7).abs() < 1e-12);
        assert_eq!(td_target_sarsa(-1.0, 0.9, 7.0, true), -1.0);
        assert!((td_target_sarsa(-1.0, 0.9, -3.0, false) - -3.7).abs() < 1e-12);
        assert_eq!(
            td_target_sarsa(-1.0, 0.9, q[4], false),
            td_target_qlearning(-1.0, 0.9, &q, false)
        );
    }

    #[test]
    fn epsilon_decays_per_episode() {
        let cfg = TdConfig::default();
        assert_eq!(epsilon_schedule(&cfg, 0), 1.0);
        assert_eq!(epsilon_schedule(&cfg, 10), 0.995f64.powi(10));
        assert_eq!(epsilon_schedule(&cfg, 5000), 0.01);
    }

    #[test]
    fn smoke_run_is_deterministic() {
        let cfg = TdConfig {
            episodes_max: 10,
            target_mean_fidelity: 1.0,
            ..TdConfig::default()
        };
        let run = |algo| {
            let mut env = GateEnv::new(EnvConfig::default()).unwrap();
            train_td(&mut env, algo, &cfg, 17).unwrap()
        };
        for algo in [TdAlgorithm::QLearning, TdAlgorithm::Sarsa] {
            let a = run(algo);
            assert_eq!(a.episodes.len(), 10);
            assert!((a.final_epsilon - 0.951110130465772).abs() < 1e-12);
            let b = run(algo);
            assert_eq!(a.network, b.network);
            let strip = |v: &[EpisodeStats]| {
                v.iter()
                    .map(|e| EpisodeStats {
                        wall_ms: 0.0,
                        ..e.clone()
                    })
                    .collect::<Vec<_>>()
            };
            assert_eq!(strip(&a.episodes), strip(&b.episodes));
        }
    }

    #[test]
    fn replay_and_target_network_run() {
        let cfg = TdConfig {
            episodes_max: 3,
            replay: Some(ReplayConfig {
                capacity: 64,
                batch_size: 8,
            }),
            target_sync_steps: Some(5),
            ..TdConfig::default()
        };
        let mut env = GateEnv::new(EnvConfig::default()).unwrap();
        let out = train_td(&mut env, TdAlgorithm::Sarsa, &cfg, 3).unwrap();
        assert_eq!(out.episodes.len(), 3);
    }

    #[test]
    fn rejects_mismatched_config() {
        let cfg = TdConfig {
            epsilon_decay: 1.0,
            ..TdConfig::default()
        };
        let mut env = GateEnv::new(EnvConfig::default()).unwrap();
        assert!(matches!(
            train_td(&mut env, TdAlgorithm::Sarsa, &cfg, 0),
            Err(AgentError::InvalidConfig {
                field: "epsilon_decay",
                ..
            })
        ));
    }
}
