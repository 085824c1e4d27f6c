use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, invalid, AgentError, BestEpisode, EpisodeStats, Tracker};
use crate::env::{EnvConfig, GateEnv, CONTINUOUS_DIM};
use crate::nn::{
    gaussian_entropy, gaussian_logprob, init_mlp, Adam, AdamConfig, ForwardCache, Gradients, Mlp,
    NnError,
};

const RNG_STREAM_INIT_POLICY: u64 = 11;
const RNG_STREAM_INIT_VALUE: u64 = 12;
const RNG_STREAM_ROLLOUT: u64 = 13;
const RNG_STREAM_SHUFFLE: u64 = 14;
const RNG_STREAM_RESET: u64 = 15;

/// Early exit once any finished episode is good enough.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriterion {
    /// Strict lower bound on the final fidelity.
    pub fidelity: f64,
    /// Inclusive upper bound on the gate duration.
    pub max_duration_ns: f64,
}

impl StopCriterion {
    pub fn is_met(&self, terminated: bool, fidelity: f64, duration_ns: f64) -> bool {
        terminated && fidelity > self.fidelity && duration_ns <= self.max_duration_ns
    }
}

impl Default for StopCriterion {
    fn default() -> Self {
        Self {
            fidelity: 0.999,
            max_duration_ns: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    /// Steps each worker collects per iteration.
    pub horizon: usize,
    pub n_envs: usize,
    pub epochs_per_iter: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub iterations_max: usize,
    /// Initial standard deviation of the policy in normalised action units.
    pub init_std: f64,
    /// Adds a per-state log-std head on top of the shared log-std vector.
    pub state_dependent_std: bool,
    pub adam: AdamConfig,
    /// Stop as soon as a finished episode meets `stop`.
    pub stop_early: bool,
    pub stop: StopCriterion,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lambda: 0.95,
            clip_eps: 0.2,
            horizon: 200,
            n_envs: 8,
            epochs_per_iter: 10,
            minibatch: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            iterations_max: 2000,
            init_std: 0.5,
            state_dependent_std: false,
            adam: AdamConfig::default().without_decay(),
            stop_early: true,
            stop: StopCriterion::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid("lambda", "must lie in (0, 1]"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps.is_finite()) {
            return Err(invalid("clip_eps", "must be positive"));
        }
        for (field, v) in [
            ("horizon", self.horizon),
            ("n_envs", self.n_envs),
            ("epochs_per_iter", self.epochs_per_iter),
            ("minibatch", self.minibatch),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return Err(invalid("value_coef", "loss weights must be non-negative"));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(invalid("init_std", "must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(invalid("adam.lr", "must be positive"));
        }
        Ok(())
    }
}

/// Diagonal Gaussian policy. The network outputs the means, and, with a
/// state-dependent std, a second block added to the shared `log_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

/// Distribution parameters for one observation.
#[derive(Debug, Clone)]
struct PolicyOutput {
    mean: Vec<f64>,
    log_std: Vec<f64>,
    cache: ForwardCache,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        init_std: f64,
        state_dependent: bool,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let out = if state_dependent {
            2 * action_dim
        } else {
            action_dim
        };
        let mut net = init_mlp(obs_dim, out, seed)?;
        if state_dependent {
            // Start the per-state correction at zero so the initial spread is init_std.
            let last = net.n_layers() - 1;
            let hidden = net.sizes()[last];
            let w_offset = net.params().len() - out - out * hidden;
            for p in &mut net.params_mut()[w_offset + action_dim * hidden..w_offset + out * hidden]
            {
                *p = 0.0;
            }
        }
        Ok(Self {
            net,
            log_std: vec![init_std.ln(); action_dim],
        })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn state_dependent(&self) -> bool {
        self.net.output_dim() == 2 * self.action_dim()
    }

    /// Sets the bias of the mean head, i.e. the mean for a zero hidden state.
    pub fn set_mean_bias(&mut self, bias: &[f64]) {
        let last = self.net.n_layers() - 1;
        let n = self.action_dim();
        self.net.bias_mut(last)[..n].copy_from_slice(bias);
    }

    fn output(&self, obs: &[f64]) -> Result<PolicyOutput, NnError> {
        let (y, cache) = self.net.forward(obs)?;
        let n = self.action_dim();
        let mean = y[..n].to_vec();
        let mut log_std = self.log_std.clone();
        if self.state_dependent() {
            for (l, extra) in log_std.iter_mut().zip(&y[n..]) {
                *l += extra;
            }
        }
        Ok(PolicyOutput {
            mean,
            log_std,
            cache,
        })
    }

    /// Mean and log standard deviation for `obs`.
    pub fn distribution(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
        let out = self.output(obs)?;
        Ok((out.mean, out.log_std))
    }

    /// Draws an action and returns it with its log-density.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64), AgentError> {
        let (mean, log_std) = self.distribution(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, l)| m + l.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let logp = gaussian_logprob(&mean, &log_std, &action)?.logp;
        Ok((action, logp))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64, AgentError> {
        let (mean, log_std) = self.distribution(obs)?;
        Ok(gaussian_logprob(&mean, &log_std, action)?.logp)
    }
}

/// How a transition ended its episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeEnd {
    Continue,
    Terminated,
    /// Cut short by the step limit or the rollout horizon; the value of the
    /// next state stands in for the rest of the episode.
    Truncated {
        bootstrap: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// Pre-clip sample in normalised units.
    pub action: Vec<f64>,
    pub logp: f64,
    pub reward: f64,
    pub value: f64,
    pub end: EpisodeEnd,
}

/// Consecutive transitions from one worker, possibly spanning episodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
}

/// Generalized advantage estimates and value targets, before normalization.
///
/// The recursion restarts at every episode boundary. A trajectory whose last
/// transition is `Continue` has no value for its final state and is rejected.
pub fn gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    let ts = &traj.transitions;
    let last = ts.last().ok_or(AgentError::EmptyTrajectory)?;
    if last.end == EpisodeEnd::Continue {
        return Err(AgentError::MissingBootstrap);
    }
    let mut advantages = vec![0.0; ts.len()];
    let mut running = 0.0;
    for t in (0..ts.len()).rev() {
        let (next_value, carry) = match ts[t].end {
            EpisodeEnd::Continue => (ts[t + 1].value, running),
            EpisodeEnd::Terminated => (0.0, 0.0),
            EpisodeEnd::Truncated { bootstrap } => (bootstrap, 0.0),
        };
        let delta = ts[t].reward + gamma * next_value - ts[t].value;
        running = delta + gamma * lambda * carry;
        advantages[t] = running;
    }
    let returns = advantages
        .iter()
        .zip(ts)
        .map(|(a, t)| a + t.value)
        .collect();
    Ok((advantages, returns))
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

/// One pooled training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoSample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub logp_old: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Loss terms averaged over a minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PpoLoss {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Mean of `logp_old − logp_new`.
    pub approx_kl: f64,
    /// Fraction of samples whose ratio left `[1 − ε, 1 + ε]`.
    pub clip_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoGradients {
    pub policy: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: Vec<f64>,
}

/// Clipped-surrogate loss with value regression and entropy bonus, and its
/// exact gradient with respect to every parameter.
pub fn ppo_loss(
    batch: &[&PpoSample],
    policy: &GaussianPolicy,
    value: &Mlp,
    cfg: &PpoConfig,
) -> Result<(PpoLoss, PpoGradients), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyTrajectory);
    }
    let n = batch.len() as f64;
    let dim = policy.action_dim();
    let state_dependent = policy.state_dependent();
    let mut loss = PpoLoss::default();
    let mut g_policy = Gradients::zeros_like(&policy.net);
    let mut g_log_std = vec![0.0; dim];
    let mut g_value = Gradients::zeros_like(value);

    for (index, s) in batch.iter().enumerate() {
        let out = policy.output(&s.obs)?;
        let lp = gaussian_logprob(&out.mean, &out.log_std, &s.action)?;
        let ratio = (lp.logp - s.logp_old).exp();
        if !ratio.is_finite() {
            return Err(AgentError::NonFiniteRatio {
                index,
                logp_new: lp.logp,
                logp_old: s.logp_old,
            });
        }
        let a = s.advantage;
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let unclipped_obj = ratio * a;
        let clipped_obj = clipped * a;
        // The min picks the unclipped term unless the clipped one is strictly
        // smaller, in which case the ratio is outside the band and the
        // objective is flat in the parameters.
        let (objective, d_obj_d_logp) = if unclipped_obj <= clipped_obj {
            (unclipped_obj, ratio * a)
        } else {
            (clipped_obj, 0.0)
        };
        loss.policy -= objective / n;
        loss.approx_kl += (s.logp_old - lp.logp) / n;
        if clipped != ratio {
            loss.clip_frac += 1.0 / n;
        }
        let entropy = gaussian_entropy(&out.log_std);
        loss.entropy += entropy / n;

        // dL/dlogp for L = −mean(objective); entropy enters each log_std with slope 1.
        let d_logp = -d_obj_d_logp / n;
        let d_ls: Vec<f64> = lp
            .d_log_std
            .iter()
            .map(|g| d_logp * g - cfg.entropy_coef / n)
            .collect();
        let mut dl_dy: Vec<f64> = lp.d_mean.iter().map(|g| d_logp * g).collect();
        if state_dependent {
            dl_dy.extend_from_slice(&d_ls);
        }
        for (acc, g) in g_log_std.iter_mut().zip(&d_ls) {
            *acc += g;
        }
        if dl_dy.iter().any(|g| *g != 0.0) {
            g_policy.add_assign(&policy.net.backward(&out.cache, &dl_dy)?);
        }

        let (v, cache) = value.forward(&s.obs)?;
        let err = v[0] - s.ret;
        loss.value += cfg.value_coef * err * err / n;
        g_value.add_assign(&value.backward(&cache, &[cfg.value_coef * 2.0 * err / n])?);
    }
    loss.total = loss.policy + loss.value - cfg.entropy_coef * loss.entropy;
    Ok((
        loss,
        PpoGradients {
            policy: g_policy.params,
            log_std: g_log_std,
            value: g_value.params,
        },
    ))
}

/// Summary of one PPO iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStats {
    pub seed: u64,
    pub iteration: usize,
    pub samples: usize,
    /// Episodes finished during this iteration's rollouts.
    pub episodes: usize,
    #[serde(rename = "return")]
    pub mean_return: Option<f64>,
    pub mean_final_fidelity: Option<f64>,
    pub iteration_best_fidelity: Option<f64>,
    /// Highest final fidelity over all episodes so far.
    pub best_fidelity: f64,
    /// Shortest gate above the bonus threshold so far.
    pub shortest_success_ns: Option<f64>,
    pub gate_duration_ns: Option<f64>,
    pub loss: PpoLoss,
    pub mean_std: f64,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub iterations: Vec<IterationStats>,
    pub episodes: Vec<EpisodeStats>,
    pub best: Option<BestEpisode>,
    pub stopped_early: bool,
}

struct FinishedEpisode {
    episode_return: f64,
    fidelity: f64,
    duration_ns: f64,
    steps: usize,
    terminated: bool,
    episode: BestEpisode,
}

struct Rollout {
    trajectory: Trajectory,
    finished: Vec<FinishedEpisode>,
}

fn value_of(value: &Mlp, obs: &[f64]) -> Result<f64, AgentError> {
    Ok(value.predict(obs)?[0])
}

/// Runs one worker for `horizon` steps from a fresh episode.
fn collect(
    env: &mut GateEnv,
    policy: &GaussianPolicy,
    value: &Mlp,
    horizon: usize,
    rng_seed: u64,
    reset_seed: u64,
) -> Result<Rollout, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut reset_count = 0u64;
    let mut obs = env.reset(derive_seed(reset_seed, 0, reset_count)).features;
    let mut transitions = Vec::with_capacity(horizon);
    let mut finished = Vec::new();
    let mut episode_return = 0.0;

    for t in 0..horizon {
        let (action, logp) = policy.sample(&obs, &mut rng)?;
        let v = value_of(value, &obs)?;
        let step = env.step_continuous(&action)?;
        episode_return += step.reward;
        let next_obs = step.observation.features;
        let end = if step.terminated {
            EpisodeEnd::Terminated
        } else if step.truncated || t + 1 == horizon {
            EpisodeEnd::Truncated {
                bootstrap: value_of(value, &next_obs)?,
            }
        } else {
            EpisodeEnd::Continue
        };
        transitions.push(Transition {
            obs: std::mem::replace(&mut obs, next_obs),
            action,
            logp,
            reward: step.reward,
            value: v,
            end,
        });
        if step.terminated || step.truncated {
            finished.push(FinishedEpisode {
                episode_return,
                fidelity: step.info.fidelity,
                duration_ns: step.info.gate_duration_ns,
                steps: env.steps(),
                terminated: step.terminated,
                episode: BestEpisode {
                    episode: 0,
                    fidelity: step.info.fidelity,
                    duration_ns: step.info.gate_duration_ns,
                    terminated: step.terminated,
                    schedule: env.export_schedule(),
                },
            });
            episode_return = 0.0;
            if t + 1 < horizon {
                reset_count += 1;
                obs = env.reset(derive_seed(reset_seed, 0, reset_count)).features;
            }
        }
    }
    Ok(Rollout {
        trajectory: Trajectory { transitions },
        finished,
    })
}

/// Normalised value of each initial control, so the untrained mean policy
/// starts at the environment's initial pulse.
fn initial_action(cfg: &EnvConfig) -> [f64; CONTINUOUS_DIM] {
    let norm = |x: f64, [lo, hi]: [f64; 2]| 2.0 * (x - lo) / (hi - lo) - 1.0;
    [
        norm(cfg.eps_init[0], cfg.eps_bounds),
        norm(cfg.eps_init[1], cfg.eps_bounds),
        norm(cfg.tun_init, cfg.tun_bounds),
    ]
}

/// PPO with `n_envs` parallel rollout workers.
///
/// Each iteration every worker starts a fresh episode and collects `horizon`
/// steps from a snapshot of the current policy, resetting whenever an episode
/// ends. Worker randomness depends only on `(seed, iteration, worker)` and the
/// results are merged in worker order, so the outcome does not depend on the
/// thread pool.
pub fn train_ppo(
    env_config: &EnvConfig,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<PpoOutcome, AgentError> {
    cfg.validate()?;
    let mut envs = (0..cfg.n_envs)
        .map(|_| GateEnv::new(env_config.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let obs_dim = envs[0].observation_len();
    let mut policy = GaussianPolicy::new(
        obs_dim,
        CONTINUOUS_DIM,
        cfg.init_std,
        cfg.state_dependent_std,
        derive_seed(seed, RNG_STREAM_INIT_POLICY, 0),
    )?;
    policy.set_mean_bias(&initial_action(env_config));
    let mut value = init_mlp(obs_dim, 1, derive_seed(seed, RNG_STREAM_INIT_VALUE, 0))?;
    let mut opt_policy = Adam::new(cfg.adam, policy.net.params().len());
    let mut opt_log_std = Adam::new(cfg.adam, CONTINUOUS_DIM);
    let mut opt_value = Adam::new(cfg.adam, value.params().len());

    let mut tracker = Tracker::default();
    let mut iterations = Vec::new();
    let mut episodes = Vec::new();
    let mut stopped_early = false;

    for iteration in 0..cfg.iterations_max {
        let started = Instant::now();
        let rollouts: Vec<Result<Rollout, AgentError>> = {
            let (policy, value) = (&policy, &value);
            envs.par_iter_mut()
                .enumerate()
                .map(|(worker, env)| {
                    let it = iteration as u64;
                    let stream = derive_seed(seed, RNG_STREAM_ROLLOUT, it);
                    let resets = derive_seed(seed, RNG_STREAM_RESET, it);
                    collect(
                        env,
                        policy,
                        value,
                        cfg.horizon,
                        derive_seed(stream, 0, worker as u64),
                        derive_seed(resets, 0, worker as u64),
                    )
                })
                .collect()
        };

        let mut samples = Vec::with_capacity(cfg.n_envs * cfg.horizon);
        let mut iter_episodes: Vec<EpisodeStats> = Vec::new();
        let mut criterion_met = false;
        for (worker, rollout) in rollouts.into_iter().enumerate() {
            let rollout = rollout.map_err(|e| AgentError::Worker {
                worker,
                iteration,
                message: e.to_string(),
            })?;
            let (adv, ret) = gae(&rollout.trajectory, cfg.gamma, cfg.lambda)?;
            for ((t, a), r) in rollout.trajectory.transitions.into_iter().zip(adv).zip(ret) {
                samples.push(PpoSample {
                    obs: t.obs,
                    action: t.action,
                    logp_old: t.logp,
                    advantage: a,
                    ret: r,
                });
            }
            for mut f in rollout.finished {
                let index = episodes.len() + iter_episodes.len();
                f.episode.episode = index;
                criterion_met |=
                    cfg.stop_early && cfg.stop.is_met(f.terminated, f.fidelity, f.duration_ns);
                tracker.observe(f.episode, env_config.f_bonus);
                iter_episodes.push(EpisodeStats {
                    seed,
                    episode: index,
                    iteration: Some(iteration),
                    worker: Some(worker),
                    episode_return: f.episode_return,
                    final_fidelity: f.fidelity,
                    best_fidelity: tracker.best_fidelity,
                    gate_duration_ns: f.duration_ns,
                    steps: f.steps,
                    terminated: f.terminated,
                    epsilon: None,
                    mean_loss: None,
                    wall_ms: 0.0,
                });
            }
        }

        let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
        normalize_advantages(&mut adv);
        for (s, a) in samples.iter_mut().zip(adv) {
            s.advantage = a;
        }

        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, RNG_STREAM_SHUFFLE, iteration as u64));
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut loss_sum = PpoLoss::default();
        let mut n_batches = 0usize;
        for _ in 0..cfg.epochs_per_iter {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch) {
                let batch: Vec<&PpoSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let (l, g) = ppo_loss(&batch, &policy, &value, cfg)?;
                opt_policy.step(policy.net.params_mut(), &g.policy)?;
                opt_log_std.step(&mut policy.log_std, &g.log_std)?;
                opt_value.step(value.params_mut(), &g.value)?;
                loss_sum.total += l.total;
                loss_sum.policy += l.policy;
                loss_sum.value += l.value;
                loss_sum.entropy += l.entropy;
                loss_sum.approx_kl += l.approx_kl;
                loss_sum.clip_frac += l.clip_frac;
                n_batches += 1;
            }
        }
        let k = n_batches.max(1) as f64;
        let loss = PpoLoss {
            total: loss_sum.total / k,
            policy: loss_sum.policy / k,
            value: loss_sum.value / k,
            entropy: loss_sum.entropy / k,
            approx_kl: loss_sum.approx_kl / k,
            clip_frac: loss_sum.clip_frac / k,
        };

        let n_ep = iter_episodes.len();
        let mean = |f: fn(&EpisodeStats) -> f64| {
            (n_ep > 0).then(|| iter_episodes.iter().map(f).sum::<f64>() / n_ep as f64)
        };
        iterations.push(IterationStats {
            seed,
            iteration,
            samples: samples.len(),
            episodes: n_ep,
            mean_return: mean(|e| e.episode_return),
            mean_final_fidelity: mean(|e| e.final_fidelity),
            iteration_best_fidelity: iter_episodes
                .iter()
                .map(|e| e.final_fidelity)
                .reduce(f64::max),
            best_fidelity: tracker.best_fidelity,
            shortest_success_ns: tracker.shortest_success_ns,
            gate_duration_ns: mean(|e| e.gate_duration_ns),
            loss,
            mean_std: policy.log_std.iter().map(|l| l.exp()).sum::<f64>() / CONTINUOUS_DIM as f64,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        episodes.extend(iter_episodes);
        if criterion_met {
            stopped_early = true;
            break;
        }
    }

    Ok(PpoOutcome {
        policy,
        value,
        iterations,
        episodes,
        best: tracker.best,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(reward: f64, value: f64, end: EpisodeEnd) -> Transition {
        Transition {
            obs: vec![],
            action: vec![],
            logp: 0.0,
            reward,
            value,
            end,
        }
    }

    #[test]
    fn gae_hand_example() {
        let traj = Trajectory {
            transitions: vec![
                tr(-1.0, 0.0, EpisodeEnd::Continue),
                tr(-1.0, 1.0, EpisodeEnd::Truncated { bootstrap: 2.0 }),
            ],
        };
        let (a, r) = gae(&traj, 0.9, 0.95).unwrap();
        assert!((a[0] - -0.271).abs() < 1e-12);
        assert!((a[1] - -0.2).abs() < 1e-12);
        assert!((r[0] - -0.271).abs() < 1e-12);
        assert!((r[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn gae_single_and_terminal() {
        let traj = Trajectory {
            transitions: vec![tr(3.0, 0.5, EpisodeEnd::Truncated { bootstrap: 1.0 })],
        };
        assert!((gae(&traj, 0.9, 0.95).unwrap().0[0] - (3.0 + 0.9 - 0.5)).abs() < 1e-12);
        let traj = Trajectory {
            transitions: vec![
                tr(-1.0, 4.0, EpisodeEnd::Continue),
                tr(7.0, 2.0, EpisodeEnd::Terminated),
            ],
        };
        let (a, _) = gae(&traj, 0.9, 0.95).unwrap();
        assert_eq!(a[1], 5.0);
    }

    #[test]
    fn gae_resets_at_episode_boundary() {
        let traj = Trajectory {
            transitions: vec![
                tr(1.0, 0.0, EpisodeEnd::Terminated),
                tr(100.0, 0.0, EpisodeEnd::Truncated { bootstrap: 0.0 }),
            ],
        };
        assert_eq!(gae(&traj, 0.9, 0.95).unwrap().0, vec![1.0, 100.0]);
    }

    #[test]
    fn gae_rejects_missing_bootstrap() {
        let traj = Trajectory {
            transitions: vec![tr(1.0, 0.0, EpisodeEnd::Continue)],
        };
        assert!(matches!(
            gae(&traj, 0.9, 0.95),
            Err(AgentError::MissingBootstrap)
        ));
        assert!(matches!(
            gae(&Trajectory::default(), 0.9, 0.95),
            Err(AgentError::EmptyTrajectory)
        ));
    }

    #[test]
    fn normalization() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }

    fn sample_with_ratio(policy: &GaussianPolicy, ratio: f64, advantage: f64) -> PpoSample {
        let obs = vec![0.1, -0.2, 0.3];
        let action = vec![0.05, -0.1, 0.2];
        let logp = policy.log_prob(&obs, &action).unwrap();
        PpoSample {
            obs,
            action,
            logp_old: logp - ratio.ln(),
            advantage,
            ret: 0.0,
        }
    }

    #[test]
    fn clip_arithmetic() {
        let policy = GaussianPolicy::new(3, 3, 0.5, false, 1).unwrap();
        let value = init_mlp(3, 1, 2).unwrap();
        let cfg = PpoConfig::default();
        let cases = [(1.0, 0.7, -0.7), (2.0, 1.0, -1.2), (0.5, -1.0, 0.8)];
        for (ratio, adv, expected) in cases {
            let s = sample_with_ratio(&policy, ratio, adv);
            let (l, g) = ppo_loss(&[&s], &policy, &value, &cfg).unwrap();
            assert!(
                (l.policy - expected).abs() < 1e-12,
                "ratio {ratio}: {}",
                l.policy
            );
            if ratio != 1.0 {
                assert_eq!(l.clip_frac, 1.0);
                assert!(g.policy.iter().all(|x| *x == 0.0));
                assert!(g.log_std.iter().all(|x| *x == 0.0));
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let policy = GaussianPolicy::new(4, 3, 0.5, true, 9).unwrap();
        let obs = [0.0, 1.0, 0.5, -0.5];
        let a = policy
            .sample(&obs, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let b = policy
            .sample(&obs, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(a, b);
        assert!((policy.log_prob(&obs, &a.0).unwrap() - a.1).abs() < 1e-12);
        // zeroed head: spread equals init_std
        let (_, ls) = policy.distribution(&obs).unwrap();
        for l in ls {
            assert!((l - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_sample_count_and_determinism() {
        let env = EnvConfig::default();
        let cfg = PpoConfig {
            n_envs: 4,
            horizon: 200,
            iterations_max: 1,
            epochs_per_iter: 1,
            stop_early: false,
            ..PpoConfig::default()
        };
        let a = train_ppo(&env, &cfg, 5).unwrap();
        assert_eq!(a.iterations[0].samples, 800);
        let b = train_ppo(&env, &cfg, 5).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.value, b.value);
        assert_eq!(a.episodes, b.episodes);
    }
}
