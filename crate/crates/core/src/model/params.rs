use alloc::{format, string::String, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Result};
use crate::numerics::Tensor;
use crate::rng;

/// ChaCha stream reserved for parameter initialization.
const INIT_STREAM: u64 = 0x1217;

/// Suffixes of the per-block tensors, in storage order.
pub const BLOCK_TENSOR_NAMES: [&str; 12] = [
    "ln1.gain",
    "ln1.bias",
    "qkv.weight",
    "qkv.bias",
    "attn_out.weight",
    "attn_out.bias",
    "ln2.gain",
    "ln2.bias",
    "mlp_up.weight",
    "mlp_up.bias",
    "mlp_down.weight",
    "mlp_down.bias",
];

/// One pre-norm transformer block. Weights are `[in, out]`, applied as `x W + b`.
/// The fused QKV projection stores queries, keys and values in consecutive
/// `hidden`-wide column ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub qkv_weight: Tensor,
    pub qkv_bias: Tensor,
    pub attn_out_weight: Tensor,
    pub attn_out_bias: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub mlp_up_weight: Tensor,
    pub mlp_up_bias: Tensor,
    pub mlp_down_weight: Tensor,
    pub mlp_down_bias: Tensor,
}

impl BlockParams {
    fn zeros(h: usize) -> Self {
        Self {
            ln1_gain: Tensor::zeros(&[h]),
            ln1_bias: Tensor::zeros(&[h]),
            qkv_weight: Tensor::zeros(&[h, 3 * h]),
            qkv_bias: Tensor::zeros(&[3 * h]),
            attn_out_weight: Tensor::zeros(&[h, h]),
            attn_out_bias: Tensor::zeros(&[h]),
            ln2_gain: Tensor::zeros(&[h]),
            ln2_bias: Tensor::zeros(&[h]),
            mlp_up_weight: Tensor::zeros(&[h, 4 * h]),
            mlp_up_bias: Tensor::zeros(&[4 * h]),
            mlp_down_weight: Tensor::zeros(&[4 * h, h]),
            mlp_down_bias: Tensor::zeros(&[h]),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 12] {
        [
            &self.ln1_gain,
            &self.ln1_bias,
            &self.qkv_weight,
            &self.qkv_bias,
            &self.attn_out_weight,
            &self.attn_out_bias,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.mlp_up_weight,
            &self.mlp_up_bias,
            &self.mlp_down_weight,
            &self.mlp_down_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.qkv_weight,
            &mut self.qkv_bias,
            &mut self.attn_out_weight,
            &mut self.attn_out_bias,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.mlp_up_weight,
            &mut self.mlp_up_bias,
            &mut self.mlp_down_weight,
            &mut self.mlp_down_bias,
        ]
    }
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `[embedding_rows, hidden]`; doubles as the output projection when tied.
    pub embedding: Tensor,
    pub embedding_ln_gain: Tensor,
    pub embedding_ln_bias: Tensor,
    pub blocks: Vec<BlockParams>,
    pub final_ln_gain: Tensor,
    pub final_ln_bias: Tensor,
    /// Separate `[embedding_rows, hidden]` projection, present only when untied.
    pub output: Option<Tensor>,
}

impl ModelParams {
    /// Every tensor zero, including LayerNorm gains.
    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden;
        Self {
            embedding: Tensor::zeros(&[config.embedding_rows, h]),
            embedding_ln_gain: Tensor::zeros(&[h]),
            embedding_ln_bias: Tensor::zeros(&[h]),
            blocks: (0..config.layers).map(|_| BlockParams::zeros(h)).collect(),
            final_ln_gain: Tensor::zeros(&[h]),
            final_ln_bias: Tensor::zeros(&[h]),
            output: (!config.tied_embeddings).then(|| Tensor::zeros(&[config.embedding_rows, h])),
        }
    }

    /// Seeded initialization: embeddings ~ N(0, 0.02), projection weights
    /// ~ N(0, 0.02 / sqrt(2 * layers)), biases 0, LayerNorm gains 1.
    ///
    /// Draws are taken tensor by tensor in [`ModelParams::names`] order,
    /// row-major within a tensor.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut params = Self::zeros(config);
        let mut rng = rng::seeded(seed, INIT_STREAM);
        let proj_std = 0.02 / libm::sqrt(2.0 * config.layers as f64);
        let names = Self::names(config);
        for (name, tensor) in names.iter().zip(params.tensors_mut()) {
            let std = if name == "embedding" || name == "output" {
                0.02
            } else if name.ends_with(".weight") {
                proj_std
            } else if name.ends_with(".gain") {
                tensor.fill(1.0);
                continue;
            } else {
                continue;
            };
            for x in tensor.data_mut() {
                *x = std * rng::standard_normal(&mut rng);
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    /// Canonical tensor names, matching the order of [`ModelParams::tensors`].
    pub fn names(config: &ModelConfig) -> Vec<String> {
        let mut names: Vec<String> = ["embedding", "embedding_ln.gain", "embedding_ln.bias"]
            .map(String::from)
            .to_vec();
        for i in 0..config.layers {
            names.extend(BLOCK_TENSOR_NAMES.iter().map(|s| format!("blocks.{i}.{s}")));
        }
        names.push("final_ln.gain".into());
        names.push("final_ln.bias".into());
        if !config.tied_embeddings {
            names.push("output".into());
        }
        names
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = alloc::vec![
            &self.embedding,
            &self.embedding_ln_gain,
            &self.embedding_ln_bias
        ];
        for b in &self.blocks {
            out.extend(b.tensors());
        }
        out.push(&self.final_ln_gain);
        out.push(&self.final_ln_bias);
        out.extend(self.output.as_ref());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = alloc::vec![
            &mut self.embedding,
            &mut self.embedding_ln_gain,
            &mut self.embedding_ln_bias
        ];
        for b in &mut self.blocks {
            out.extend(b.tensors_mut());
        }
        out.push(&mut self.final_ln_gain);
        out.push(&mut self.final_ln_bias);
        out.extend(self.output.as_mut());
        out
    }

    pub fn num_params(&self) -> u64 {
        self.tensors().iter().map(|t| t.len() as u64).sum()
    }

    /// Output projection: the embedding table when tied.
    pub fn output_projection(&self) -> &Tensor {
        self.output.as_ref().unwrap_or(&self.embedding)
    }

    /// Rebuilds a parameter set from tensors given in canonical order, checking
    /// every shape against `config`.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let mut params = Self::zeros(config);
        let names = Self::names(config);
        if tensors.len() != names.len() {
            return Err(ModelError::ParamMismatch(format!(
                "expected {} tensors, got {}",
                names.len(),
                tensors.len()
            )));
        }
        for ((slot, given), name) in params.tensors_mut().into_iter().zip(tensors).zip(&names) {
            if slot.shape() != given.shape() {
                return Err(ModelError::ParamMismatch(format!(
                    "{name}: expected shape {:?}, got {:?}",
                    slot.shape(),
                    given.shape()
                )));
            }
            *slot = given;
        }
        Ok(params)
    }

    pub fn check_config(&self, config: &ModelConfig) -> Result<()> {
        let reference = Self::zeros(config);
        let ours = self.tensors();
        let theirs = reference.tensors();
        if ours.len() != theirs.len() {
            return Err(ModelError::ParamMismatch(format!(
                "expected {} tensors, got {}",
                theirs.len(),
                ours.len()
            )));
        }
        for (i, (a, b)) in ours.iter().zip(&theirs).enumerate() {
            if a.shape() != b.shape() {
                return Err(ModelError::ParamMismatch(format!(
                    "tensor {i}: expected shape {:?}, got {:?}",
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::count_params;

    fn tiny(tied: bool) -> ModelConfig {
        ModelConfig {
            layers: 2,
            hidden: 8,
            heads: 2,
            vocab_size: 10,
            embedding_rows: 12,
            seq_len: 6,
            tied_embeddings: tied,
        }
    }

    #[test]
    fn tensor_count_matches_formula() {
        for tied in [true, false] {
            let c = tiny(tied);
            let p = ModelParams::zeros(&c);
            assert_eq!(p.num_params(), count_params(&c));
            assert_eq!(ModelParams::names(&c).len(), p.tensors().len());
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let c = tiny(true);
        assert_eq!(ModelParams::init(&c, 3), ModelParams::init(&c, 3));
        assert_ne!(ModelParams::init(&c, 3), ModelParams::init(&c, 4));
        let p = ModelParams::init(&c, 3);
        assert!(p.final_ln_gain.data().iter().all(|&g| g == 1.0));
        assert!(p.blocks[0].qkv_bias.data().iter().all(|&b| b == 0.0));
        assert!(p.output.is_none());
    }

    #[test]
    fn from_tensors_round_trip_and_rejects_bad_shapes() {
        let c = tiny(false);
        let p = ModelParams::init(&c, 9);
        let tensors: Vec<Tensor> = p.tensors().into_iter().cloned().collect();
        assert_eq!(ModelParams::from_tensors(&c, tensors.clone()).unwrap(), p);
        let mut bad = tensors;
        bad[1] = Tensor::zeros(&[7]);
        assert!(ModelParams::from_tensors(&c, bad).is_err());
        assert!(p.check_config(&tiny(true)).is_err());
    }
}
