use alloc::{vec, vec::Vec};

use super::{check_finite, NumericsError, Result};

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2 pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x * Phi(x)` with `Phi` the standard normal CDF.
pub fn gelu(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(NumericsError::NonFinite(x));
    }
    Ok(gelu_unchecked(x))
}

#[inline]
pub fn gelu_unchecked(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

/// d/dx GELU(x) = Phi(x) + x * phi(x).
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = INV_SQRT_2PI * libm::exp(-0.5 * x * x);
    cdf + x * pdf
}

/// Elementwise backward: `dx[i] = dy[i] * GELU'(x[i])`.
pub fn gelu_backward(x: &[f64], dy: &[f64]) -> Result<Vec<f64>> {
    if x.len() != dy.len() {
        return Err(NumericsError::LengthMismatch {
            expected: x.len(),
            found: dy.len(),
        });
    }
    Ok(x.iter()
        .zip(dy)
        .map(|(&x, &g)| g * gelu_derivative(x))
        .collect())
}

pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(NumericsError::Empty);
    }
    check_finite(v)?;
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Max-shifted softmax over a row. `-inf` entries map to exactly zero.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = libm::exp(*x - max);
        total += *x;
    }
    let inv = 1.0 / total;
    row.iter_mut().for_each(|x| *x *= inv);
}

pub fn log_softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(NumericsError::Empty);
    }
    check_finite(v)?;
    let lse = log_sum_exp(v);
    Ok(v.iter().map(|x| x - lse).collect())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// Vector-Jacobian product of softmax given its output `p`:
/// `dv = p * (dp - <p, dp>)`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
    if p.len() != dp.len() {
        return Err(NumericsError::LengthMismatch {
            expected: p.len(),
            found: dp.len(),
        });
    }
    let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    Ok(p.iter().zip(dp).map(|(&p, &g)| p * (g - dot)).collect())
}

/// Normalized input and reciprocal standard deviation saved by
/// [`layer_norm_forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub rstd: f64,
}

pub fn layer_norm(v: &[f64], gain: &[f64], bias: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_ln_args(v, gain, bias)?;
    check_finite(v)?;
    let mut out = vec![0.0; v.len()];
    layer_norm_forward(v, gain, bias, eps, &mut out);
    Ok(out)
}

fn check_ln_args(v: &[f64], gain: &[f64], bias: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(NumericsError::Empty);
    }
    for other in [gain, bias] {
        if other.len() != v.len() {
            return Err(NumericsError::LengthMismatch {
                expected: v.len(),
                found: other.len(),
            });
        }
    }
    Ok(())
}

/// `out = gain * (v - mean) / sqrt(var + eps) + bias` with the population
/// variance. When `var + eps == 0` the normalized value is taken as zero.
pub fn layer_norm_forward(
    v: &[f64],
    gain: &[f64],
    bias: &[f64],
    eps: f64,
    out: &mut [f64],
) -> LayerNormCache {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let denom = libm::sqrt(var + eps);
    let rstd = if denom > 0.0 { 1.0 / denom } else { 0.0 };
    let mut normalized = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let xhat = (v[i] - mean) * rstd;
        normalized.push(xhat);
        out[i] = gain[i] * xhat + bias[i];
    }
    LayerNormCache { normalized, rstd }
}

/// Backward of [`layer_norm_forward`]. Accumulates into `dgain` and `dbias`,
/// returns the input gradient.
pub fn layer_norm_backward(
    dy: &[f64],
    cache: &LayerNormCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let n = dy.len() as f64;
    let mut mean_dxhat = 0.0;
    let mut mean_dxhat_xhat = 0.0;
    for i in 0..dy.len() {
        let dxhat = dy[i] * gain[i];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * cache.normalized[i];
        dgain[i] += dy[i] * cache.normalized[i];
        dbias[i] += dy[i];
    }
    mean_dxhat /= n;
    mean_dxhat_xhat /= n;
    (0..dy.len())
        .map(|i| {
            let dxhat = dy[i] * gain[i];
            cache.rstd * (dxhat - mean_dxhat - cache.normalized[i] * mean_dxhat_xhat)
        })
        .collect()
}

/// `-log softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(NumericsError::IndexOutOfRange {
            index: target,
            len: logits.len(),
        });
    }
    check_finite(logits)?;
    Ok((log_sum_exp(logits) - logits[target]).max(0.0))
}

/// Gradient of [`cross_entropy`] w.r.t. the logits: `softmax(logits) - onehot(target)`.
pub fn cross_entropy_backward(logits: &[f64], target: usize) -> Result<Vec<f64>> {
    let mut grad = softmax(logits)?;
    if target >= grad.len() {
        return Err(NumericsError::IndexOutOfRange {
            index: target,
            len: grad.len(),
        });
    }
    grad[target] -= 1.0;
    Ok(grad)
}
