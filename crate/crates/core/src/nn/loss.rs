use std::f64::consts::PI;

use super::{check_len, NnError};

/// Mean squared error and its gradient `2(pred − target)/n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    check_len("mse target", pred.len(), target.len())?;
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Log-density of a diagonal Gaussian with its analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLogProb {
    pub logp: f64,
    pub d_mean: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

pub fn gaussian_logprob(
    mean: &[f64],
    log_std: &[f64],
    sample: &[f64],
) -> Result<GaussianLogProb, NnError> {
    check_len("gaussian log_std", mean.len(), log_std.len())?;
    check_len("gaussian sample", mean.len(), sample.len())?;
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    let mut logp = 0.0;
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_log_std = Vec::with_capacity(mean.len());
    for k in 0..mean.len() {
        let inv_var = (-2.0 * log_std[k]).exp();
        let diff = sample[k] - mean[k];
        let z2 = diff * diff * inv_var;
        logp += -0.5 * z2 - log_std[k] - half_log_2pi;
        d_mean.push(diff * inv_var);
        d_log_std.push(z2 - 1.0);
    }
    Ok(GaussianLogProb {
        logp,
        d_mean,
        d_log_std,
    })
}

/// Entropy of a diagonal Gaussian; its gradient w.r.t. each `log_std` is 1.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    let per_dim = 0.5 * (2.0 * PI * std::f64::consts::E).ln();
    log_std.iter().map(|l| l + per_dim).sum()
}
