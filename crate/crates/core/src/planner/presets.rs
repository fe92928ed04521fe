use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{unknown, PlannerError, Result};
use crate::model::ModelConfig;
use crate::numerics::{AdamConfig, DecayStyle, Schedule};

pub const PRESET_NAMES: [&str; 2] = ["hybrid-7b", "hybrid-176b"];

const VOCAB: usize = 250_680;
const PADDED_ROWS: usize = 250_880;
const SEQ_LEN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl core::str::FromStr for Phase {
    type Err = PlannerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Phase::Pretrain),
            "finetune" => Ok(Phase::Finetune),
            other => Err(PlannerError::UnknownPhase(other.into())),
        }
    }
}

/// One column and phase of the published hyperparameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub phase: Phase,
    pub model: ModelConfig,
    pub schedule: Schedule,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    /// Sequences per optimizer step.
    pub global_batch: usize,
    pub total_tokens: u64,
}

pub fn load_preset(name: &str, phase: Phase) -> Result<Preset> {
    let (layers, hidden, heads, batch, peak, min, total) = match name {
        "hybrid-7b" => (30, 4096, 32, 512, 1.2e-4, 1e-5, 341_000_000_000),
        "hybrid-176b" => (70, 14336, 112, 2048, 6e-5, 6e-6, 366_000_000_000),
        _ => return Err(unknown(name)),
    };
    let model = ModelConfig {
        layers,
        hidden,
        heads,
        vocab_size: VOCAB,
        embedding_rows: PADDED_ROWS,
        seq_len: SEQ_LEN,
        tied_embeddings: true,
    };
    let preset = match phase {
        Phase::Pretrain => Preset {
            name: name.into(),
            phase,
            model,
            schedule: Schedule {
                peak_lr: peak,
                min_lr: min,
                warmup_tokens: 375_000_000,
                decay_tokens: 410_000_000_000,
                style: DecayStyle::Cosine,
            },
            adam: AdamConfig::new(0.9, 0.95, 0.1),
            clip_norm: 1.0,
            global_batch: batch,
            total_tokens: total,
        },
        Phase::Finetune => Preset {
            name: name.into(),
            phase,
            model,
            schedule: Schedule {
                peak_lr: 2e-5,
                min_lr: 2e-5,
                warmup_tokens: 0,
                decay_tokens: 0,
                style: DecayStyle::Constant,
            },
            adam: AdamConfig::new(0.9, 0.95, 1e-4),
            clip_norm: 1.0,
            global_batch: 2048,
            total_tokens: 13_000_000_000,
        },
    };
    Ok(preset)
}
