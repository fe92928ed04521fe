//! Analytical parallelism planner: pipeline layer partitioning, ZeRO stage 1
//! per-rank memory, and the published training presets.

mod presets;

pub use presets::{load_preset, Phase, Preset, PRESET_NAMES};

use alloc::{string::String, vec, vec::Vec};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error("cannot split {layers} layers into {stages} stages")]
    BadPartition { layers: usize, stages: usize },
    #[error("{0} must be >= 1")]
    NonPositive(&'static str),
    #[error("unknown preset {name:?}; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },
    #[error("unknown phase {0:?}; valid phases: pretrain, finetune")]
    UnknownPhase(String),
}

pub type Result<T> = core::result::Result<T, PlannerError>;

/// Bytes per parameter under mixed-precision Adam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionBytes {
    pub weight: u64,
    pub grad: u64,
    /// fp32 master copy plus both moments.
    pub optimizer: u64,
}

impl Default for PrecisionBytes {
    fn default() -> Self {
        Self {
            weight: 2,
            grad: 2,
            optimizer: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPlan {
    /// Layers per pipeline stage, in order.
    pub stages: Vec<usize>,
    pub dp_ranks: usize,
    pub precision: PrecisionBytes,
}

impl ParallelPlan {
    pub fn new(layers: usize, stages: usize, dp_ranks: usize) -> Result<Self> {
        if dp_ranks == 0 {
            return Err(PlannerError::NonPositive("data-parallel ranks"));
        }
        Ok(Self {
            stages: pipeline_partition(layers, stages)?,
            dp_ranks,
            precision: PrecisionBytes::default(),
        })
    }

    pub fn layers(&self) -> usize {
        self.stages.iter().sum()
    }
}

/// Per-rank bytes. `total` is the sum of the other three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub weights: f64,
    pub grads: f64,
    pub optimizer_shard: f64,
    pub total: f64,
}

/// Balanced split: the first `layers % stages` stages take one extra layer.
pub fn pipeline_partition(layers: usize, stages: usize) -> Result<Vec<usize>> {
    if stages == 0 || stages > layers {
        return Err(PlannerError::BadPartition { layers, stages });
    }
    let (q, r) = (layers / stages, layers % stages);
    let mut out = vec![q; stages];
    for s in &mut out[..r] {
        *s += 1;
    }
    Ok(out)
}

/// ZeRO stage 1 with the default byte layout: weights and gradients are
/// replicated, optimizer state is divided across `dp_ranks`.
pub fn zero1_memory(param_count: u64, dp_ranks: usize) -> Result<MemoryEstimate> {
    zero1_memory_with(param_count, dp_ranks, &PrecisionBytes::default())
}

pub fn zero1_memory_with(
    param_count: u64,
    dp_ranks: usize,
    bytes: &PrecisionBytes,
) -> Result<MemoryEstimate> {
    if param_count == 0 {
        return Err(PlannerError::NonPositive("parameter count"));
    }
    if dp_ranks == 0 {
        return Err(PlannerError::NonPositive("data-parallel ranks"));
    }
    let p = param_count as f64;
    let weights = bytes.weight as f64 * p;
    let grads = bytes.grad as f64 * p;
    let optimizer_shard = bytes.optimizer as f64 * p / dp_ranks as f64;
    Ok(MemoryEstimate {
        weights,
        grads,
        optimizer_shard,
        total: weights + grads + optimizer_shard,
    })
}

pub(crate) fn valid_names() -> String {
    PRESET_NAMES.join(", ")
}

pub(crate) fn unknown(name: &str) -> PlannerError {
    PlannerError::UnknownPreset {
        name: name.into(),
        valid: valid_names(),
    }
}
