//! Token-budget training loop, perplexity evaluation and the sequential vs
//! hybrid forgetting experiment.

mod eval;
mod forgetting;
mod trainer;

pub use eval::{perplexity, perplexity_of_sequences};
pub use forgetting::{
    run_forgetting_experiment, DomainPerplexity, ForgettingReport, Regime, RegimeResult,
    RegimeSpec, SeedResult, StageSpec,
};
pub use trainer::{StepReport, TrainRunConfig, Trainer, TrainerState};

use alloc::string::String;

use crate::corpus::CorpusError;
use crate::model::ModelError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("training data has no scored tokens")]
    NoScoredTokens,
    #[error("regime budgets differ: {sequential} vs {hybrid} tokens")]
    BudgetMismatch { sequential: u64, hybrid: u64 },
    #[error("regimes use different model configurations")]
    ModelMismatch,
    #[error("invalid regime: {0}")]
    InvalidRegime(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = core::result::Result<T, TrainError>;
