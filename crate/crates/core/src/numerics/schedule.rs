use alloc::format;

use serde::{Deserialize, Serialize};

use super::{NumericsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayStyle {
    Cosine,
    Constant,
}

/// Learning rate as a function of tokens consumed.
///
/// Linear warmup from 0 to `peak_lr` over `[0, warmup_tokens]`. Cosine style
/// then anneals to `min_lr` over `[warmup_tokens, decay_tokens]` and holds it
/// afterwards; constant style stays at `peak_lr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub peak_lr: f64,
    pub min_lr: f64,
    pub warmup_tokens: u64,
    pub decay_tokens: u64,
    pub style: DecayStyle,
}

impl Schedule {
    pub fn new(
        peak_lr: f64,
        min_lr: f64,
        warmup_tokens: u64,
        decay_tokens: u64,
        style: DecayStyle,
    ) -> Result<Self> {
        let s = Self {
            peak_lr,
            min_lr,
            warmup_tokens,
            decay_tokens,
            style,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(lr: f64) -> Result<Self> {
        Self::new(lr, lr, 0, 0, DecayStyle::Constant)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.peak_lr) || !positive(self.min_lr) {
            return Err(NumericsError::InvalidArgument(format!(
                "learning rates must be positive, got peak {} min {}",
                self.peak_lr, self.min_lr
            )));
        }
        if self.min_lr > self.peak_lr {
            return Err(NumericsError::InvalidArgument(format!(
                "min_lr {} exceeds peak_lr {}",
                self.min_lr, self.peak_lr
            )));
        }
        if self.style == DecayStyle::Cosine && self.warmup_tokens >= self.decay_tokens {
            return Err(NumericsError::InvalidArgument(format!(
                "cosine decay needs warmup_tokens < decay_tokens, got {} >= {}",
                self.warmup_tokens, self.decay_tokens
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, tokens_seen: u64) -> f64 {
        if tokens_seen < self.warmup_tokens {
            return self.peak_lr * (tokens_seen as f64 / self.warmup_tokens as f64);
        }
        match self.style {
            DecayStyle::Constant => self.peak_lr,
            DecayStyle::Cosine => {
                if tokens_seen >= self.decay_tokens {
                    return self.min_lr;
                }
                let progress = (tokens_seen - self.warmup_tokens) as f64
                    / (self.decay_tokens - self.warmup_tokens) as f64;
                let weight = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
                // Convex combination keeps both endpoints exact.
                self.peak_lr * weight + self.min_lr * (1.0 - weight)
            }
        }
    }
}

pub fn lr_at(schedule: &Schedule, tokens_seen: u64) -> f64 {
    schedule.lr_at(tokens_seen)
}
