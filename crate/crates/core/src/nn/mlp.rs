use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_len, NnError};

pub const HIDDEN_WIDTH: usize = 64;

/// Multilayer perceptron, `tanh` hidden layers and a linear output.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; its weights are
/// stored row-major (`out × in`) followed by its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr")]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Deserialize)]
struct MlpRepr {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = NnError;

    fn try_from(r: MlpRepr) -> Result<Self, NnError> {
        Mlp::from_parts(r.sizes, r.params)
    }
}

/// Activations recorded by [`Mlp::forward`]; `activations[0]` is the input
/// and the last entry is the output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations
            .last()
            .expect("cache always holds the input")
    }
}

/// Partial derivatives with the same layout as [`Mlp`] parameters, plus the
/// gradient with respect to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            params: vec![0.0; net.params.len()],
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += b;
        }
        for (a, b) in self.input.iter_mut().zip(&other.input) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.params.iter_mut().for_each(|g| *g *= factor);
        self.input.iter_mut().for_each(|g| *g *= factor);
    }
}

/// Two hidden layers of [`HIDDEN_WIDTH`] with Glorot-uniform weights.
pub fn init_mlp(in_dim: usize, out_dim: usize, seed: u64) -> Result<Mlp, NnError> {
    Mlp::new(&[in_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, out_dim], seed)
}

impl Mlp {
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for w in net.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..=limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::Topology(sizes.to_vec()));
        }
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        })
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self, NnError> {
        let template = Self::zeros(&sizes)?;
        check_len("parameter vector", template.params.len(), params.len())?;
        if let Some(index) = params.iter().position(|p| !p.is_finite()) {
            return Err(NnError::Checkpoint(format!(
                "parameter {index} is not finite ({})",
                params[index]
            )));
        }
        Ok(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated topology")
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weight offset, bias offset)` of layer `l`.
    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut offset = 0;
        for w in self.sizes.windows(2).take(layer) {
            offset += w[0] * w[1] + w[1];
        }
        (offset, offset + self.sizes[layer] * self.sizes[layer + 1])
    }

    /// Weight of layer `l` from input `i` to output `o`.
    pub fn weight(&self, layer: usize, o: usize, i: usize) -> f64 {
        let (w, _) = self.layer_offsets(layer);
        self.params[w + o * self.sizes[layer] + i]
    }

    pub fn bias(&self, layer: usize, o: usize) -> f64 {
        let (_, b) = self.layer_offsets(layer);
        self.params[b + o]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (_, b) = self.layer_offsets(layer);
        let n = self.sizes[layer + 1];
        &mut self.params[b..b + n]
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        check_len("network input", self.input_dim(), x.len())?;
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput {
                index,
                value: x[index],
            });
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let (w, b) = self.layer_offsets(layer);
        let hidden = layer + 1 < self.n_layers();
        (0..n_out)
            .map(|o| {
                let row = &self.params[w + o * n_in..w + (o + 1) * n_in];
                let z = self.params[b + o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                if hidden {
                    z.tanh()
                } else {
                    z
                }
            })
            .collect()
    }

    /// Output only, without recording activations.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for layer in 0..self.n_layers() {
            a = self.layer_forward(layer, &a);
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        for layer in 0..self.n_layers() {
            let next = self.layer_forward(layer, activations.last().expect("non-empty"));
            activations.push(next);
        }
        let y = activations.last().expect("non-empty").clone();
        Ok((y, ForwardCache { activations }))
    }

    /// Reverse-mode gradients of a scalar loss given `dL/dy`.
    pub fn backward(&self, cache: &ForwardCache, dl_dy: &[f64]) -> Result<Gradients, NnError> {
        check_len(
            "cached activations",
            self.sizes.len(),
            cache.activations.len(),
        )?;
        check_len("output gradient", self.output_dim(), dl_dy.len())?;
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = dl_dy.to_vec();
        for layer in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let (w, b) = self.layer_offsets(layer);
            if layer + 1 < self.n_layers() {
                // d tanh(z)/dz = 1 - tanh²
                for (d, a) in delta.iter_mut().zip(&cache.activations[layer + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &cache.activations[layer];
            check_len("cached activation", n_in, input.len())?;
            let mut upstream = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                grads[b + o] = d;
                let row = w + o * n_in;
                for i in 0..n_in {
                    grads[row + i] = d * input[i];
                    upstream[i] += d * self.params[row + i];
                }
            }
            delta = upstream;
        }
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }
}
