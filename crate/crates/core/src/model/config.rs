use alloc::{format, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Architecture hyperparameters.
///
/// `embedding_rows` is the number of rows actually allocated for the token
/// embedding (the vocabulary padded for hardware alignment); logits are only
/// produced for the first `vocab_size` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub vocab_size: usize,
    pub embedding_rows: usize,
    pub seq_len: usize,
    pub tied_embeddings: bool,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(ModelError::InvalidConfig(msg));
        if self.layers == 0 {
            return fail("layers must be >= 1".into());
        }
        if self.hidden == 0 || self.heads == 0 {
            return fail(format!(
                "hidden ({}) and heads ({}) must be >= 1",
                self.hidden, self.heads
            ));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return fail(format!(
                "hidden {} is not divisible by heads {}",
                self.hidden, self.heads
            ));
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be >= 1".into());
        }
        if self.embedding_rows < self.vocab_size {
            return fail(format!(
                "embedding_rows {} is smaller than vocab_size {}",
                self.embedding_rows, self.vocab_size
            ));
        }
        if self.seq_len == 0 {
            return fail("seq_len must be >= 1".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

/// Exact parameter total:
/// `rows*h + 2h + layers*(12h^2 + 13h) + 2h`, plus another `rows*h` when the
/// output projection is not tied to the embedding.
pub fn count_params(config: &ModelConfig) -> u64 {
    let h = config.hidden as u64;
    let rows = config.embedding_rows as u64;
    let per_block = 12 * h * h + 13 * h;
    let output = if config.tied_embeddings { 0 } else { rows * h };
    rows * h + 2 * h + config.layers as u64 * per_block + 2 * h + output
}

/// Token ids `w_1 .. w_T` of one sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<u32>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks every id against the vocabulary and the length against the context.
    pub fn validate_for(&self, config: &ModelConfig) -> Result<()> {
        validate_tokens(&self.tokens, config)
    }
}

pub(crate) fn validate_tokens(tokens: &[u32], config: &ModelConfig) -> Result<()> {
    if tokens.len() > config.seq_len {
        return Err(ModelError::SequenceTooLong {
            len: tokens.len(),
            max: config.seq_len,
        });
    }
    if let Some((position, &token)) = tokens
        .iter()
        .enumerate()
        .find(|(_, &t)| t as usize >= config.vocab_size)
    {
        return Err(ModelError::TokenOutOfRange {
            token,
            position,
            vocab_size: config.vocab_size,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(layers: usize, hidden: usize, heads: usize, rows: usize) -> ModelConfig {
        ModelConfig {
            layers,
            hidden,
            heads,
            vocab_size: rows.min(250_680),
            embedding_rows: rows,
            seq_len: 2048,
            tied_embeddings: true,
        }
    }

    #[test]
    fn published_parameter_totals() {
        assert_eq!(count_params(&cfg(30, 4096, 32, 250_880)), 7_069_016_064);
        assert_eq!(count_params(&cfg(70, 14336, 112, 250_880)), 176_247_271_424);
    }

    #[test]
    fn hand_counted_tiny_model() {
        let c = ModelConfig {
            vocab_size: 8,
            ..cfg(1, 4, 1, 8)
        };
        // embedding 32, embedding LN 8, block 12*16 + 13*4 = 244, final LN 8
        assert_eq!(count_params(&c), 292);
        let untied = ModelConfig {
            tied_embeddings: false,
            ..c
        };
        assert_eq!(count_params(&untied), 292 + 32);
    }

    #[test]
    fn validation_rules() {
        assert!(cfg(2, 16, 2, 64).validate().is_ok());
        assert!(cfg(2, 16, 3, 64).validate().is_err());
        assert!(cfg(0, 16, 2, 64).validate().is_err());
        let mut c = cfg(2, 16, 2, 64);
        c.vocab_size = 65;
        assert!(c.validate().is_err());
        c.vocab_size = 64;
        c.seq_len = 0;
        assert!(c.validate().is_err());
    }
}
