//! Dense kernels, their derivatives, the Adam optimizer and token-driven
//! learning-rate schedules.
//!
//! Everything operates on `f64` slices in row-major order. Each differentiable
//! kernel ships with a matching `*_backward` so the model can run a fully
//! hand-written reverse pass.

mod adam;
mod kernels;
pub mod linalg;
mod schedule;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, global_norm, AdamConfig, OptimizerState};
pub use kernels::{
    cross_entropy, cross_entropy_backward, gelu, gelu_backward, gelu_derivative, gelu_unchecked,
    layer_norm, layer_norm_backward, layer_norm_forward, log_softmax, softmax, softmax_backward,
    softmax_in_place, LayerNormCache,
};
pub use schedule::{lr_at, DecayStyle, Schedule};
pub use tensor::Tensor;

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("non-finite value {0} in input")]
    NonFinite(f64),
    #[error("empty input")]
    Empty,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, NumericsError>;

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&bad) => Err(NumericsError::NonFinite(bad)),
        None => Ok(()),
    }
}
