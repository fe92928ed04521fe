//! BLOOM-style decoder-only transformer.
//!
//! Token embedding followed by an embedding LayerNorm, `layers` pre-norm
//! blocks whose self-attention carries ALiBi distance biases instead of
//! position embeddings, a final LayerNorm and an output projection that reuses
//! the embedding table when embeddings are tied. The model scores a sequence
//! autoregressively: row `t` of the logits is the distribution of token `t+1`
//! given tokens `0..=t`.

mod alibi;
mod config;
mod forward;
mod params;

pub use alibi::{alibi_bias, alibi_slopes, AlibiBias};
pub use config::{count_params, ModelConfig, TokenSequence};
pub use forward::{
    forward_logits, generate_greedy, loss_and_grad, masked_loss, sequence_log_prob, LossOutput,
    ScoredSequence,
};
pub use params::{BlockParams, ModelParams, BLOCK_TENSOR_NAMES};

use alloc::string::String;

use crate::numerics::NumericsError;

/// LayerNorm epsilon used everywhere inside the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token {token} at position {position} is outside the vocabulary of {vocab_size}")]
    TokenOutOfRange {
        token: u32,
        position: usize,
        vocab_size: usize,
    },
    #[error("sequence of length {len} exceeds the context of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("sequence of length {len} is shorter than the required {min}")]
    SequenceTooShort { len: usize, min: usize },
    #[error("parameter set does not match config: {0}")]
    ParamMismatch(String),
    #[error("batch contains no scored positions")]
    NothingToScore,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = core::result::Result<T, ModelError>;
