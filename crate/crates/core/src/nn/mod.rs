//! Small fully connected networks with hand-written backpropagation.
//!
//! Hidden layers use `tanh`, the output layer is linear. Parameters live in
//! one flat vector so the optimizer and checkpoints can treat them uniformly.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod mlp;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use gradcheck::{check_gradients, GradCheck};
pub use loss::{gaussian_entropy, gaussian_logprob, mse_loss, GaussianLogProb};
pub use mlp::{init_mlp, ForwardCache, Gradients, Mlp, HIDDEN_WIDTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("input component {index} is not finite ({value})")]
    NonFiniteInput { index: usize, value: f64 },
    #[error("gradient component {index} is not finite ({value}); update rejected")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("network needs at least an input and an output layer, got sizes {0:?}")]
    Topology(Vec<usize>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), NnError> {
    if expected != got {
        return Err(NnError::Shape {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
