use serde::{Deserialize, Serialize};

use super::{check_len, NnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Inverse-time decay: the `k`-th update (0-based) uses `lr / (1 + lr_decay·k)`.
    pub lr_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr_decay: 0.01,
        }
    }
}

impl AdamConfig {
    pub fn without_decay(self) -> Self {
        Self {
            lr_decay: 0.0,
            ..self
        }
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn current_lr(&self) -> f64 {
        self.config.lr / (1.0 + self.config.lr_decay * self.t as f64)
    }

    /// Applies one descent step. Non-finite gradients leave parameters and
    /// state untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        check_len("optimizer parameters", self.m.len(), params.len())?;
        check_len("optimizer gradients", self.m.len(), grads.len())?;
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient {
                index,
                value: grads[index],
            });
        }
        let c = self.config;
        let lr = self.current_lr();
        self.t += 1;
        let bias1 = 1.0 - c.beta1.powi(self.t as i32);
        let bias2 = 1.0 - c.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g;
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[k] / bias1;
            let v_hat = self.v[k] / bias2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut opt = Adam::new(AdamConfig::default(), 3);
        let mut p = [0.5, -1.0, 2.0];
        opt.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [0.5, -1.0, 2.0]);
        assert_eq!(opt.timestep(), 1);
    }

    #[test]
    fn first_step_by_hand() {
        let mut opt = Adam::new(AdamConfig::default().without_decay(), 1);
        let mut p = [0.0];
        opt.step(&mut p, &[2.0]).unwrap();
        // m̂ = 2, v̂ = 4, step = lr·2/(2 + 1e-8)
        let expected = -0.001 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn decay_schedule() {
        let mut opt = Adam::new(AdamConfig::default(), 1);
        let mut p = [0.0];
        assert_eq!(opt.current_lr(), 1e-3);
        for _ in 0..100 {
            opt.step(&mut p, &[1.0]).unwrap();
        }
        assert!((opt.current_lr() - 1e-3 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut opt = Adam::new(AdamConfig::default(), 2);
        let mut p = [1.0, 1.0];
        let err = opt.step(&mut p, &[0.1, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, NnError::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, [1.0, 1.0]);
        assert_eq!(opt.timestep(), 0);
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let run = || {
            let mut opt = Adam::new(AdamConfig::default(), 4);
            let mut p = [0.3, -0.2, 0.1, 0.9];
            for k in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x + k as f64 * 1e-3).collect();
                opt.step(&mut p, &g).unwrap();
            }
            p
        };
        assert_eq!(run().map(f64::to_bits), run().map(f64::to_bits));
    }

    #[test]
    fn descends_a_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // L(θ) = ‖θ‖², ∇L = 2θ
        let mut theta: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.01,
                ..AdamConfig::default().without_decay()
            },
            theta.len(),
        );
        for _ in 0..1000 {
            let g: Vec<f64> = theta.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut theta, &g).unwrap();
        }
        let norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-2, "{norm}");
    }
}
