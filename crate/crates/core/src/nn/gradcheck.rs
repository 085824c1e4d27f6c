use super::{Mlp, NnError};

/// Worst disagreement between backpropagation and central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter index of the worst relative error.
    pub worst_param: usize,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, rel: f64) -> bool {
        self.max_rel_error < rel
    }
}

/// Compares the analytic parameter gradient of `loss(net(x))` with a
/// five-point central difference of step `h` (truncation error O(h^4)).
/// `loss` returns the value and `dL/dy`.
///
/// Parameters whose absolute error is below `abs_floor` count as exact.
pub fn check_gradients(
    net: &Mlp,
    x: &[f64],
    h: f64,
    abs_floor: f64,
    loss: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> Result<GradCheck, NnError> {
    let (y, cache) = net.forward(x)?;
    let analytic = net.backward(&cache, &loss(&y).1)?.params;
    let mut probe = net.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_param: 0,
        checked: analytic.len(),
    };
    for (k, &g) in analytic.iter().enumerate() {
        let original = probe.params()[k];
        let mut at = |offset: f64| -> Result<f64, NnError> {
            probe.params_mut()[k] = original + offset;
            Ok(loss(&probe.predict(x)?).0)
        };
        let numeric = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
        probe.params_mut()[k] = original;

        let abs = (g - numeric).abs();
        if abs < abs_floor {
            continue;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
        let rel = abs / g.abs().max(numeric.abs());
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = k;
        }
    }
    Ok(report)
}
