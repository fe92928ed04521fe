use alloc::{vec, vec::Vec};

use super::config::validate_tokens;
use super::{
    alibi_slopes, ModelConfig, ModelError, ModelParams, Result, TokenSequence, LAYER_NORM_EPS,
};
use crate::numerics::linalg::{
    add_row_bias, dot, matmul, matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, sum_rows_acc,
};
use crate::numerics::{gelu_derivative, gelu_unchecked, layer_norm_backward, layer_norm_forward};
use crate::numerics::{softmax_in_place, LayerNormCache, Tensor};

/// Row-wise LayerNorm over a `[rows, h]` buffer.
struct LnRows {
    rows: Vec<LayerNormCache>,
}

fn ln_rows(x: &[f64], h: usize, gain: &Tensor, bias: &Tensor, out: &mut [f64]) -> LnRows {
    let rows = x
        .chunks_exact(h)
        .zip(out.chunks_exact_mut(h))
        .map(|(xr, or)| layer_norm_forward(xr, gain.data(), bias.data(), LAYER_NORM_EPS, or))
        .collect();
    LnRows { rows }
}

fn ln_rows_backward(
    dy: &[f64],
    h: usize,
    cache: &LnRows,
    gain: &Tensor,
    dgain: &mut Tensor,
    dbias: &mut Tensor,
) -> Vec<f64> {
    let mut dx = Vec::with_capacity(dy.len());
    for (dyr, c) in dy.chunks_exact(h).zip(&cache.rows) {
        dx.extend(layer_norm_backward(
            dyr,
            c,
            gain.data(),
            dgain.data_mut(),
            dbias.data_mut(),
        ));
    }
    dx
}

struct BlockCache {
    ln1: LnRows,
    /// LN1 output, `[T, h]`.
    attn_in: Vec<f64>,
    /// `[T, 3h]`
    qkv: Vec<f64>,
    /// `[heads, T, T]`, zero above the diagonal.
    probs: Vec<f64>,
    /// Concatenated head outputs, `[T, h]`.
    context: Vec<f64>,
    ln2: LnRows,
    /// LN2 output, `[T, h]`.
    mlp_in: Vec<f64>,
    /// Pre-activation, `[T, 4h]`.
    up: Vec<f64>,
    /// GELU output, `[T, 4h]`.
    act: Vec<f64>,
}

struct ForwardCache {
    embed_ln: LnRows,
    blocks: Vec<BlockCache>,
    final_ln: LnRows,
    /// Final LN output, `[T, h]`.
    features: Vec<f64>,
}

struct Dims {
    t: usize,
    h: usize,
    heads: usize,
    d: usize,
    vocab: usize,
}

impl Dims {
    fn new(config: &ModelConfig, t: usize) -> Self {
        Self {
            t,
            h: config.hidden,
            heads: config.heads,
            d: config.head_dim(),
            vocab: config.vocab_size,
        }
    }
}

fn block_forward(p: &super::BlockParams, dims: &Dims, slopes: &[f64], x: &mut [f64]) -> BlockCache {
    let Dims { t, h, heads, d, .. } = *dims;
    let scale = 1.0 / libm::sqrt(d as f64);

    let mut attn_in = vec![0.0; t * h];
    let ln1 = ln_rows(x, h, &p.ln1_gain, &p.ln1_bias, &mut attn_in);

    let mut qkv = vec![0.0; t * 3 * h];
    matmul(&attn_in, p.qkv_weight.data(), t, h, 3 * h, &mut qkv);
    add_row_bias(&mut qkv, p.qkv_bias.data());

    let mut probs = vec![0.0; heads * t * t];
    let mut context = vec![0.0; t * h];
    for head in 0..heads {
        let off = head * d;
        for q in 0..t {
            let query = &qkv[q * 3 * h + off..q * 3 * h + off + d];
            let row = &mut probs[(head * t + q) * t..(head * t + q) * t + q + 1];
            for (k, s) in row.iter_mut().enumerate() {
                let key = &qkv[k * 3 * h + h + off..k * 3 * h + h + off + d];
                *s = scale * dot(query, key) - slopes[head] * (q - k) as f64;
            }
            softmax_in_place(row);
            let out = &mut context[q * h + off..q * h + off + d];
            for (k, &w) in row.iter().enumerate() {
                let value = &qkv[k * 3 * h + 2 * h + off..k * 3 * h + 2 * h + off + d];
                for (o, &v) in out.iter_mut().zip(value) {
                    *o += w * v;
                }
            }
        }
    }

    // x += context Wo + bo
    matmul_acc(&context, p.attn_out_weight.data(), t, h, h, x);
    add_row_bias(x, p.attn_out_bias.data());

    let mut mlp_in = vec![0.0; t * h];
    let ln2 = ln_rows(x, h, &p.ln2_gain, &p.ln2_bias, &mut mlp_in);
    let mut up = vec![0.0; t * 4 * h];
    matmul(&mlp_in, p.mlp_up_weight.data(), t, h, 4 * h, &mut up);
    add_row_bias(&mut up, p.mlp_up_bias.data());
    let act: Vec<f64> = up.iter().map(|&u| gelu_unchecked(u)).collect();
    matmul_acc(&act, p.mlp_down_weight.data(), t, 4 * h, h, x);
    add_row_bias(x, p.mlp_down_bias.data());

    BlockCache {
        ln1,
        attn_in,
        qkv,
        probs,
        context,
        ln2,
        mlp_in,
        up,
        act,
    }
}

/// Backward through one block. `dx` holds the gradient w.r.t. the block output
/// on entry and w.r.t. the block input on exit.
fn block_backward(
    p: &super::BlockParams,
    g: &mut super::BlockParams,
    cache: &BlockCache,
    dims: &Dims,
    dx: &mut [f64],
) {
    let Dims { t, h, heads, d, .. } = *dims;
    let scale = 1.0 / libm::sqrt(d as f64);

    // MLP branch: out = x_mid + GELU(LN2(x_mid) Wup + bup) Wd + bd
    matmul_at_b_acc(&cache.act, dx, t, 4 * h, h, g.mlp_down_weight.data_mut());
    sum_rows_acc(dx, h, g.mlp_down_bias.data_mut());
    let mut d_act = vec![0.0; t * 4 * h];
    matmul_a_bt_acc(dx, p.mlp_down_weight.data(), t, h, 4 * h, &mut d_act);
    for (da, &u) in d_act.iter_mut().zip(&cache.up) {
        *da *= gelu_derivative(u);
    }
    let d_up = d_act;
    matmul_at_b_acc(
        &cache.mlp_in,
        &d_up,
        t,
        h,
        4 * h,
        g.mlp_up_weight.data_mut(),
    );
    sum_rows_acc(&d_up, 4 * h, g.mlp_up_bias.data_mut());
    let mut d_mlp_in = vec![0.0; t * h];
    matmul_a_bt_acc(&d_up, p.mlp_up_weight.data(), t, 4 * h, h, &mut d_mlp_in);
    let via_ln2 = ln_rows_backward(
        &d_mlp_in,
        h,
        &cache.ln2,
        &p.ln2_gain,
        &mut g.ln2_gain,
        &mut g.ln2_bias,
    );
    for (a, b) in dx.iter_mut().zip(&via_ln2) {
        *a += b;
    }

    // Attention branch: x_mid = x_in + Attn(LN1(x_in)) Wo + bo
    matmul_at_b_acc(&cache.context, dx, t, h, h, g.attn_out_weight.data_mut());
    sum_rows_acc(dx, h, g.attn_out_bias.data_mut());
    let mut d_context = vec![0.0; t * h];
    matmul_a_bt_acc(dx, p.attn_out_weight.data(), t, h, h, &mut d_context);

    let mut d_qkv = vec![0.0; t * 3 * h];
    let mut d_probs = vec![0.0; t];
    for head in 0..heads {
        let off = head * d;
        for q in 0..t {
            let probs = &cache.probs[(head * t + q) * t..(head * t + q) * t + q + 1];
            let d_out = &d_context[q * h + off..q * h + off + d];
            let mut weighted = 0.0;
            for k in 0..=q {
                let v_at = k * 3 * h + 2 * h + off;
                d_probs[k] = dot(d_out, &cache.qkv[v_at..v_at + d]);
                weighted += probs[k] * d_probs[k];
                for (dv, &go) in d_qkv[v_at..v_at + d].iter_mut().zip(d_out) {
                    *dv += probs[k] * go;
                }
            }
            let q_at = q * 3 * h + off;
            for k in 0..=q {
                let d_score = probs[k] * (d_probs[k] - weighted) * scale;
                if d_score == 0.0 {
                    continue;
                }
                let k_at = k * 3 * h + h + off;
                for i in 0..d {
                    d_qkv[q_at + i] += d_score * cache.qkv[k_at + i];
                    d_qkv[k_at + i] += d_score * cache.qkv[q_at + i];
                }
            }
        }
    }

    matmul_at_b_acc(&cache.attn_in, &d_qkv, t, h, 3 * h, g.qkv_weight.data_mut());
    sum_rows_acc(&d_qkv, 3 * h, g.qkv_bias.data_mut());
    let mut d_attn_in = vec![0.0; t * h];
    matmul_a_bt_acc(&d_qkv, p.qkv_weight.data(), t, 3 * h, h, &mut d_attn_in);
    let via_ln1 = ln_rows_backward(
        &d_attn_in,
        h,
        &cache.ln1,
        &p.ln1_gain,
        &mut g.ln1_gain,
        &mut g.ln1_bias,
    );
    for (a, b) in dx.iter_mut().zip(&via_ln1) {
        *a += b;
    }
}

/// Logits `[T, vocab_size]` plus everything the backward pass needs.
fn forward_cached(
    params: &ModelParams,
    config: &ModelConfig,
    tokens: &[u32],
) -> Result<(Vec<f64>, ForwardCache)> {
    validate_tokens(tokens, config)?;
    let dims = Dims::new(config, tokens.len());
    let Dims { t, h, vocab, .. } = dims;
    let slopes = alibi_slopes(config.heads)?;

    let mut embedded = Vec::with_capacity(t * h);
    for &tok in tokens {
        embedded.extend_from_slice(params.embedding.row(tok as usize));
    }
    let mut x = vec![0.0; t * h];
    let embed_ln = ln_rows(
        &embedded,
        h,
        &params.embedding_ln_gain,
        &params.embedding_ln_bias,
        &mut x,
    );

    let blocks = params
        .blocks
        .iter()
        .map(|b| block_forward(b, &dims, &slopes, &mut x))
        .collect();

    let mut features = vec![0.0; t * h];
    let final_ln = ln_rows(
        &x,
        h,
        &params.final_ln_gain,
        &params.final_ln_bias,
        &mut features,
    );

    let projection = params.output_projection().data();
    let mut logits = vec![0.0; t * vocab];
    matmul_a_bt_acc(
        &features,
        &projection[..vocab * h],
        t,
        h,
        vocab,
        &mut logits,
    );

    Ok((
        logits,
        ForwardCache {
            embed_ln,
            blocks,
            final_ln,
            features,
        },
    ))
}

fn backward(
    params: &ModelParams,
    config: &ModelConfig,
    tokens: &[u32],
    cache: &ForwardCache,
    d_logits: &[f64],
    grads: &mut ModelParams,
) {
    let dims = Dims::new(config, tokens.len());
    let Dims { t, h, vocab, .. } = dims;

    let projection = params.output_projection().data();
    let mut d_features = vec![0.0; t * h];
    matmul_acc(
        d_logits,
        &projection[..vocab * h],
        t,
        vocab,
        h,
        &mut d_features,
    );
    let d_projection = match grads.output.as_mut() {
        Some(out) => out,
        None => &mut grads.embedding,
    };
    matmul_at_b_acc(
        d_logits,
        &cache.features,
        t,
        vocab,
        h,
        &mut d_projection.data_mut()[..vocab * h],
    );

    let mut dx = ln_rows_backward(
        &d_features,
        h,
        &cache.final_ln,
        &params.final_ln_gain,
        &mut grads.final_ln_gain,
        &mut grads.final_ln_bias,
    );
    for (i, bc) in cache.blocks.iter().enumerate().rev() {
        block_backward(&params.blocks[i], &mut grads.blocks[i], bc, &dims, &mut dx);
    }
    let d_embedded = ln_rows_backward(
        &dx,
        h,
        &cache.embed_ln,
        &params.embedding_ln_gain,
        &mut grads.embedding_ln_gain,
        &mut grads.embedding_ln_bias,
    );
    for (pos, &tok) in tokens.iter().enumerate() {
        let row = grads.embedding.row_mut(tok as usize);
        for (r, &g) in row.iter_mut().zip(&d_embedded[pos * h..(pos + 1) * h]) {
            *r += g;
        }
    }
}

/// Next-token logits for every position, `[T, vocab_size]`.
pub fn forward_logits(
    params: &ModelParams,
    config: &ModelConfig,
    seq: &TokenSequence,
) -> Result<Tensor> {
    if seq.is_empty() {
        return Err(ModelError::SequenceTooShort { len: 0, min: 1 });
    }
    let (logits, _) = forward_cached(params, config, &seq.tokens)?;
    Ok(Tensor::from_vec(&[seq.len(), config.vocab_size], logits)?)
}

fn log_softmax_at(row: &[f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&x| libm::exp(x - max)).sum();
    row[target] - max - libm::log(sum)
}

/// `log p(w_2 .. w_T | w_1)`: the chain of next-token log-probabilities. The
/// first token is context only.
pub fn sequence_log_prob(
    params: &ModelParams,
    config: &ModelConfig,
    seq: &TokenSequence,
) -> Result<f64> {
    if seq.len() < 2 {
        return Err(ModelError::SequenceTooShort {
            len: seq.len(),
            min: 2,
        });
    }
    let (logits, _) = forward_cached(params, config, &seq.tokens)?;
    let v = config.vocab_size;
    Ok((1..seq.len())
        .map(|t| log_softmax_at(&logits[(t - 1) * v..t * v], seq.tokens[t] as usize))
        .sum())
}

/// Tokens with a per-position 0/1 loss mask. Position `t >= 1` is scored
/// against the prediction made at `t - 1` when `mask[t] == 1`; position 0
/// is never scored.
#[derive(Debug, Clone, Copy)]
pub struct ScoredSequence<'a> {
    pub tokens: &'a [u32],
    pub mask: &'a [u8],
}

impl ScoredSequence<'_> {
    pub fn scored_positions(&self) -> usize {
        self.mask.iter().skip(1).filter(|&&m| m != 0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Mean cross-entropy over scored positions.
    pub loss: f64,
    pub grads: ModelParams,
    pub scored: usize,
}

fn check_scored(seq: &ScoredSequence<'_>) -> Result<()> {
    if seq.tokens.len() != seq.mask.len() {
        return Err(ModelError::ParamMismatch(alloc::format!(
            "mask length {} differs from token length {}",
            seq.mask.len(),
            seq.tokens.len()
        )));
    }
    Ok(())
}

/// Sum of cross-entropies and number of scored positions, no gradients.
pub fn masked_loss(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[ScoredSequence<'_>],
) -> Result<(f64, usize)> {
    let v = config.vocab_size;
    let mut total = 0.0;
    let mut count = 0;
    for seq in batch {
        check_scored(seq)?;
        if seq.scored_positions() == 0 {
            continue;
        }
        let (logits, _) = forward_cached(params, config, seq.tokens)?;
        for t in 1..seq.tokens.len() {
            if seq.mask[t] != 0 {
                total -= log_softmax_at(&logits[(t - 1) * v..t * v], seq.tokens[t] as usize);
                count += 1;
            }
        }
    }
    Ok((total, count))
}

/// Mean masked cross-entropy over the batch and its exact gradient.
///
/// Sequences are processed in order and their gradients summed in that order,
/// so the result is bit-reproducible.
pub fn loss_and_grad(
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[ScoredSequence<'_>],
) -> Result<LossOutput> {
    for seq in batch {
        check_scored(seq)?;
    }
    let scored: usize = batch.iter().map(ScoredSequence::scored_positions).sum();
    if scored == 0 {
        return Err(ModelError::NothingToScore);
    }
    let inv = 1.0 / scored as f64;
    let v = config.vocab_size;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for seq in batch {
        if seq.scored_positions() == 0 {
            continue;
        }
        let (logits, cache) = forward_cached(params, config, seq.tokens)?;
        let mut d_logits = vec![0.0; logits.len()];
        for t in 1..seq.tokens.len() {
            if seq.mask[t] == 0 {
                continue;
            }
            let row = &logits[(t - 1) * v..t * v];
            let target = seq.tokens[t] as usize;
            total -= log_softmax_at(row, target);
            let d_row = &mut d_logits[(t - 1) * v..t * v];
            d_row.copy_from_slice(row);
            softmax_in_place(d_row);
            d_row[target] -= 1.0;
            d_row.iter_mut().for_each(|g| *g *= inv);
        }
        backward(params, config, seq.tokens, &cache, &d_logits, &mut grads);
    }
    Ok(LossOutput {
        loss: total * inv,
        grads,
        scored,
    })
}

/// Appends `new_tokens` argmax predictions to `prompt`, conditioning on at most
/// the last `seq_len` tokens.
pub fn generate_greedy(
    params: &ModelParams,
    config: &ModelConfig,
    prompt: &[u32],
    new_tokens: usize,
) -> Result<Vec<u32>> {
    if prompt.is_empty() {
        return Err(ModelError::SequenceTooShort { len: 0, min: 1 });
    }
    let mut out = prompt.to_vec();
    let v = config.vocab_size;
    for _ in 0..new_tokens {
        let start = out.len().saturating_sub(config.seq_len);
        let window = &out[start..];
        let (logits, _) = forward_cached(params, config, window)?;
        let last = &logits[(window.len() - 1) * v..window.len() * v];
        let mut best = 0;
        for (i, &x) in last.iter().enumerate() {
            if x > last[best] {
                best = i;
            }
        }
        out.push(best as u32);
    }
    Ok(out)
}
