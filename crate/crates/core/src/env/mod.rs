//! Episodic control environment over the two-dot simulator.
//!
//! Each step holds the controls constant for `dt_ns`, multiplies the step
//! propagator onto the accumulated unitary and scores the result against CZ.
//! Two action interfaces share the same physics: 27 discrete increments with
//! an adaptive step size, and 3 continuous absolute values in `[-1, 1]`.

mod schedule;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{
    accumulate, build_hamiltonian, cz, evaluate_gate, evolve_step, DeviceConstants,
    HamiltonianParams, SimError, UnitaryMatrix, EPS_LIMITS, FULL_DIM, QUBIT_DIM, TUN_LIMITS,
};

pub use schedule::{format_decimal, PulseRecord, PulseSchedule, ScheduleError};

/// Size of the discrete action set: three choices for each of three controls.
pub const N_ACTIONS: usize = 27;
/// Length of a continuous action.
pub const CONTINUOUS_DIM: usize = 3;

const PROPAGATOR_CACHE_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: `{field}` {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("environment must be reset before stepping")]
    NotReset,
    #[error("episode already ended; call reset")]
    EpisodeOver,
    #[error("discrete action {0} is outside 0..{N_ACTIONS}")]
    InvalidAction(usize),
    #[error("continuous action must have {expected} components, got {got}")]
    ActionLength { expected: usize, got: usize },
    #[error("continuous action component {index} is not finite")]
    NonFiniteAction { index: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    /// Projected, phase-compensated 4×4 gate: 32 features plus fidelity.
    #[default]
    Computational4,
    /// Raw accumulated 16×16 unitary: 512 features plus fidelity.
    Full16,
}

impl ObsMode {
    pub fn feature_len(self) -> usize {
        match self {
            ObsMode::Computational4 => 2 * QUBIT_DIM * QUBIT_DIM + 1,
            ObsMode::Full16 => 2 * FULL_DIM * FULL_DIM + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Coulomb and Zeeman constants; configured through the experiment's
    /// `[physics]` section.
    #[serde(skip)]
    pub constants: DeviceConstants,
    pub eps_init: [f64; 2],
    pub tun_init: f64,
    pub eps_bounds: [f64; 2],
    pub tun_bounds: [f64; 2],
    pub dt_ns: f64,
    pub max_steps: usize,
    /// Fidelity above which an episode terminates successfully.
    pub f_terminal: f64,
    /// Fidelity above which a success earns `r_bonus` instead of `r_success`.
    pub f_bonus: f64,
    pub r_step: f64,
    pub r_boundary: f64,
    pub r_success: f64,
    pub r_bonus: f64,
    pub obs_mode: ObsMode,
    /// Discrete control increments, GHz, coarsest first.
    pub step_sizes: [f64; 3],
    /// Fidelities that switch to `step_sizes[1]` and `step_sizes[2]`.
    pub step_thresholds: [f64; 2],
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            constants: DeviceConstants::default(),
            eps_init: [170.0, 70.0],
            tun_init: 2.5,
            eps_bounds: [EPS_LIMITS.0, EPS_LIMITS.1],
            tun_bounds: [TUN_LIMITS.0, TUN_LIMITS.1],
            dt_ns: 1.0,
            max_steps: 200,
            f_terminal: 0.99,
            f_bonus: 0.999,
            r_step: -1.0,
            r_boundary: -1.0,
            r_success: 100.0,
            r_bonus: 500.0,
            obs_mode: ObsMode::Computational4,
            step_sizes: [1.0, 0.1, 0.01],
            step_thresholds: [0.99, 0.999],
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl EnvConfig {
    /// Terminates only above the bonus threshold.
    pub fn strict(mut self) -> Self {
        self.f_terminal = self.f_bonus;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.constants.validate()?;
        let range = |field, b: [f64; 2], limits: (f64, f64)| {
            if !(b[0].is_finite() && b[1].is_finite()) || b[0] >= b[1] {
                return Err(invalid(
                    field,
                    format!("must be an ordered pair, got {b:?}"),
                ));
            }
            if b[0] < limits.0 || b[1] > limits.1 {
                return Err(invalid(
                    field,
                    format!("must lie within [{}, {}], got {b:?}", limits.0, limits.1),
                ));
            }
            Ok(())
        };
        range("eps_bounds", self.eps_bounds, EPS_LIMITS)?;
        range("tun_bounds", self.tun_bounds, TUN_LIMITS)?;
        for (k, &e) in self.eps_init.iter().enumerate() {
            if !(e >= self.eps_bounds[0] && e <= self.eps_bounds[1]) {
                return Err(invalid(
                    "eps_init",
                    format!("component {k} = {e} is outside eps_bounds"),
                ));
            }
        }
        if !(self.tun_init >= self.tun_bounds[0] && self.tun_init <= self.tun_bounds[1]) {
            return Err(invalid(
                "tun_init",
                format!("{} is outside tun_bounds", self.tun_init),
            ));
        }
        if !(self.dt_ns > 0.0 && self.dt_ns.is_finite()) {
            return Err(invalid("dt_ns", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        if !(self.f_terminal > 0.0 && self.f_terminal <= self.f_bonus && self.f_bonus < 1.0) {
            return Err(invalid(
                "f_terminal",
                format!(
                    "requires 0 < f_terminal <= f_bonus < 1, got {} and {}",
                    self.f_terminal, self.f_bonus
                ),
            ));
        }
        for (field, r) in [
            ("r_step", self.r_step),
            ("r_boundary", self.r_boundary),
            ("r_success", self.r_success),
            ("r_bonus", self.r_bonus),
        ] {
            if !r.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        let s = self.step_sizes;
        if !(s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0 && s[0] >= s[1] && s[1] >= s[2]) {
            return Err(invalid(
                "step_sizes",
                format!("must be positive and non-increasing, got {s:?}"),
            ));
        }
        let t = self.step_thresholds;
        if !(t[0] > 0.0 && t[0] <= t[1] && t[1] < 1.0) {
            return Err(invalid(
                "step_thresholds",
                format!("must be ascending within (0, 1), got {t:?}"),
            ));
        }
        Ok(())
    }

    /// Step penalty, optional boundary penalty, and on success the fidelity
    /// scaled by the success or bonus reward.
    pub fn reward(&self, fidelity: f64, boundary_hit: bool, terminated: bool) -> f64 {
        let mut r = self.r_step;
        if boundary_hit {
            r += self.r_boundary;
        }
        if terminated {
            let scale = if fidelity > self.f_bonus {
                self.r_bonus
            } else {
                self.r_success
            };
            r += scale * fidelity;
        }
        r
    }

    fn step_size_for(&self, fidelity: f64) -> f64 {
        if fidelity > self.step_thresholds[1] {
            self.step_sizes[2]
        } else if fidelity > self.step_thresholds[0] {
            self.step_sizes[1]
        } else {
            self.step_sizes[0]
        }
    }
}

/// On-site energies and tunnel coupling, GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub eps: [f64; 2],
    pub tun: f64,
}

impl Controls {
    pub fn detuning(&self) -> f64 {
        self.eps[0] - self.eps[1]
    }

    fn key(&self) -> [u64; 3] {
        [
            self.eps[0].to_bits(),
            self.eps[1].to_bits(),
            self.tun.to_bits(),
        ]
    }
}

/// Decodes a discrete action into `(Δε₀, Δε₁, Δt)`.
///
/// Base-3 digits, least significant first, select the change for ε₀, ε₁
/// and the tunnel coupling: 0 keeps, 1 adds `delta`, 2 subtracts it.
pub fn decode_action(index: usize, delta: f64) -> Result<[f64; 3], EnvError> {
    if index >= N_ACTIONS {
        return Err(EnvError::InvalidAction(index));
    }
    let mut out = [0.0; 3];
    let mut rest = index;
    for slot in &mut out {
        *slot = match rest % 3 {
            0 => 0.0,
            1 => delta,
            _ => -delta,
        };
        rest /= 3;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvObservation {
    pub features: Vec<f64>,
}

impl EnvObservation {
    /// Trailing fidelity feature.
    pub fn fidelity(&self) -> f64 {
        *self.features.last().expect("observation is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub fidelity: f64,
    pub gate_duration_ns: f64,
    pub controls: Controls,
    pub boundary_hit: bool,
    /// Discrete step size after this step's update.
    pub step_size: f64,
    /// False when the phase could not be compensated and the raw projection
    /// was scored.
    pub compensated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: EnvObservation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
struct Episode {
    seed: u64,
    controls: Controls,
    accumulated: UnitaryMatrix,
    steps: usize,
    step_size: f64,
    done: bool,
    schedule: Vec<PulseRecord>,
}

/// The gate-design environment. One instance runs one episode at a time.
#[derive(Debug, Clone)]
pub struct GateEnv {
    config: EnvConfig,
    target: UnitaryMatrix,
    episode: Option<Episode>,
    propagators: HashMap<[u64; 3], UnitaryMatrix>,
}

impl GateEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self {
            config,
            target: cz(),
            episode: None,
            propagators: HashMap::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn observation_len(&self) -> usize {
        self.config.obs_mode.feature_len()
    }

    /// Starts an episode from the initial controls and the identity.
    ///
    /// The dynamics are deterministic; `seed` is recorded for bookkeeping.
    pub fn reset(&mut self, seed: u64) -> EnvObservation {
        let controls = Controls {
            eps: self.config.eps_init,
            tun: self.config.tun_init,
        };
        let accumulated = UnitaryMatrix::identity(FULL_DIM);
        let eval =
            evaluate_gate(&accumulated, &self.target).expect("identity is a valid 16x16 gate");
        let observation = self.observe(&accumulated, &eval.gate, eval.report.fidelity);
        self.episode = Some(Episode {
            seed,
            controls,
            accumulated,
            steps: 0,
            step_size: self.config.step_sizes[0],
            done: false,
            schedule: Vec::new(),
        });
        observation
    }

    pub fn seed(&self) -> Option<u64> {
        self.episode.as_ref().map(|e| e.seed)
    }

    pub fn controls(&self) -> Option<Controls> {
        self.episode.as_ref().map(|e| e.controls)
    }

    pub fn steps(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn step_size(&self) -> Option<f64> {
        self.episode.as_ref().map(|e| e.step_size)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.done)
    }

    pub fn accumulated(&self) -> Option<&UnitaryMatrix> {
        self.episode.as_ref().map(|e| &e.accumulated)
    }

    pub fn step_discrete(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let episode = self.active_episode()?;
        let deltas = decode_action(action, episode.step_size)?;
        let current = episode.controls;

        let (eps_lo, eps_hi) = (self.config.eps_bounds[0], self.config.eps_bounds[1]);
        let (tun_lo, tun_hi) = (self.config.tun_bounds[0], self.config.tun_bounds[1]);
        let mut boundary_hit = false;
        let mut clip = |value: f64, lo: f64, hi: f64| {
            let clipped = value.clamp(lo, hi);
            boundary_hit |= clipped != value;
            clipped
        };
        let next = Controls {
            eps: [
                clip(current.eps[0] + deltas[0], eps_lo, eps_hi),
                clip(current.eps[1] + deltas[1], eps_lo, eps_hi),
            ],
            tun: clip(current.tun + deltas[2], tun_lo, tun_hi),
        };
        self.advance(next, boundary_hit, true)
    }

    /// Absolute controls in normalised units: each component in `[-1, 1]`
    /// maps affinely onto its bounds; out-of-range values are clipped and
    /// count as a boundary hit.
    pub fn step_continuous(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.active_episode()?;
        if action.len() != CONTINUOUS_DIM {
            return Err(EnvError::ActionLength {
                expected: CONTINUOUS_DIM,
                got: action.len(),
            });
        }
        if let Some(index) = action.iter().position(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction { index });
        }
        let mut boundary_hit = false;
        let mut scaled = [0.0; CONTINUOUS_DIM];
        for (k, &a) in action.iter().enumerate() {
            let clipped = a.clamp(-1.0, 1.0);
            boundary_hit |= clipped != a;
            let [lo, hi] = if k < 2 {
                self.config.eps_bounds
            } else {
                self.config.tun_bounds
            };
            scaled[k] = (lo + 0.5 * (clipped + 1.0) * (hi - lo)).clamp(lo, hi);
        }
        let next = Controls {
            eps: [scaled[0], scaled[1]],
            tun: scaled[2],
        };
        self.advance(next, boundary_hit, false)
    }

    /// Controls applied so far, one record per step.
    pub fn export_schedule(&self) -> PulseSchedule {
        PulseSchedule {
            records: self
                .episode
                .as_ref()
                .map(|e| e.schedule.clone())
                .unwrap_or_default(),
        }
    }

    fn active_episode(&self) -> Result<&Episode, EnvError> {
        match &self.episode {
            None => Err(EnvError::NotReset),
            Some(e) if e.done => Err(EnvError::EpisodeOver),
            Some(e) => Ok(e),
        }
    }

    fn propagator(&mut self, controls: Controls) -> Result<UnitaryMatrix, EnvError> {
        let key = controls.key();
        if let Some(u) = self.propagators.get(&key) {
            return Ok(u.clone());
        }
        let params = HamiltonianParams::new(controls.eps, controls.tun, self.config.constants);
        let u = evolve_step(&build_hamiltonian(&params)?, self.config.dt_ns)?;
        if self.propagators.len() >= PROPAGATOR_CACHE_LIMIT {
            self.propagators.clear();
        }
        self.propagators.insert(key, u.clone());
        Ok(u)
    }

    fn advance(
        &mut self,
        next: Controls,
        boundary_hit: bool,
        adaptive: bool,
    ) -> Result<StepResult, EnvError> {
        let step_u = self.propagator(next)?;
        let episode = self.episode.as_ref().ok_or(EnvError::NotReset)?;
        let accumulated = accumulate(&step_u, &episode.accumulated)?;
        let eval = evaluate_gate(&accumulated, &self.target)?;
        let fidelity = eval.report.fidelity;
        let observation = self.observe(&accumulated, &eval.gate, fidelity);

        let cfg = &self.config;
        let episode = self.episode.as_mut().expect("checked above");
        episode.schedule.push(PulseRecord {
            step: episode.steps,
            eps0: next.eps[0],
            eps1: next.eps[1],
            tunnel: next.tun,
        });
        episode.steps += 1;
        episode.controls = next;
        episode.accumulated = accumulated;
        if adaptive {
            episode.step_size = episode.step_size.min(cfg.step_size_for(fidelity));
        }

        let terminated = fidelity > cfg.f_terminal;
        let truncated = !terminated && episode.steps >= cfg.max_steps;
        episode.done = terminated || truncated;

        Ok(StepResult {
            observation,
            reward: cfg.reward(fidelity, boundary_hit, terminated),
            terminated,
            truncated,
            info: StepInfo {
                fidelity,
                gate_duration_ns: episode.steps as f64 * cfg.dt_ns,
                controls: next,
                boundary_hit,
                step_size: episode.step_size,
                compensated: eval.compensated,
            },
        })
    }

    fn observe(&self, full: &UnitaryMatrix, gate: &UnitaryMatrix, fidelity: f64) -> EnvObservation {
        let mut features = match self.config.obs_mode {
            ObsMode::Computational4 => gate.flatten_interleaved(),
            ObsMode::Full16 => full.flatten_interleaved(),
        };
        features.push(fidelity.clamp(0.0, 1.0));
        EnvObservation { features }
    }
}
