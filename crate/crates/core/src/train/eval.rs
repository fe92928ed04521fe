use alloc::vec::Vec;

use super::{Result, TrainError};
use crate::corpus::{pack, Document, LossPolicy, PackedSequence};
use crate::model::{masked_loss, ModelConfig, ModelParams, ScoredSequence};

/// `exp(total masked cross-entropy / scored tokens)` over already packed rows.
pub fn perplexity_of_sequences(
    params: &ModelParams,
    config: &ModelConfig,
    sequences: &[PackedSequence],
) -> Result<f64> {
    let rows: Vec<ScoredSequence<'_>> = sequences.iter().map(PackedSequence::as_scored).collect();
    if rows.iter().all(|r| r.scored_positions() == 0) {
        return Err(TrainError::NoScoredTokens);
    }
    let (total, count) = masked_loss(params, config, &rows)?;
    Ok(libm::exp(total / count as f64))
}

/// Packs `docs` at the model's sequence length and evaluates perplexity.
pub fn perplexity(
    params: &ModelParams,
    config: &ModelConfig,
    docs: &[Document],
    policy: LossPolicy,
) -> Result<f64> {
    let packed = pack(docs, config.seq_len, policy)?;
    perplexity_of_sequences(params, config, &packed.sequences)
}
