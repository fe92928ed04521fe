use alloc::{vec, vec::Vec};

use super::{ModelError, Result};

/// Per-head ALiBi slopes.
///
/// For a power-of-two head count `n` the slopes are `2^(-8i/n)`, `i = 1..=n`.
/// Otherwise the sequence for the largest power of two `p < n` is used and
/// completed with the odd-indexed slopes of the `2p` sequence.
pub fn alibi_slopes(n_heads: usize) -> Result<Vec<f64>> {
    if n_heads == 0 {
        return Err(ModelError::InvalidConfig(
            "ALiBi needs at least one head".into(),
        ));
    }
    let closest = 1usize << (usize::BITS - 1 - n_heads.leading_zeros());
    let geometric = |i: usize, n: usize| libm::exp2(-8.0 * i as f64 / n as f64);
    let mut slopes: Vec<f64> = (1..=closest).map(|i| geometric(i, closest)).collect();
    let remaining = n_heads - closest;
    slopes.extend((0..remaining).map(|j| geometric(2 * j + 1, 2 * closest)));
    Ok(slopes)
}

/// Dense causal ALiBi bias, `[head, query, key]`.
///
/// `bias[h, q, k] = -slope_h * (q - k)` for `k <= q`; future keys hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlibiBias {
    heads: usize,
    seq_len: usize,
    data: Vec<f64>,
}

impl AlibiBias {
    pub fn get(&self, head: usize, query: usize, key: usize) -> f64 {
        self.data[(head * self.seq_len + query) * self.seq_len + key]
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }
}

pub fn alibi_bias(seq_len: usize, n_heads: usize) -> Result<AlibiBias> {
    let slopes = alibi_slopes(n_heads)?;
    let mut data = vec![f64::NEG_INFINITY; n_heads * seq_len * seq_len];
    for (h, slope) in slopes.iter().enumerate() {
        for q in 0..seq_len {
            for k in 0..=q {
                data[(h * seq_len + q) * seq_len + k] = -slope * (q - k) as f64;
            }
        }
    }
    Ok(AlibiBias {
        heads: n_heads,
        seq_len,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_two_heads() {
        let s = alibi_slopes(8).unwrap();
        let expect: Vec<f64> = (1..=8).map(|i| 1.0 / (1u64 << i) as f64).collect();
        assert_eq!(s, expect);
        assert_eq!(alibi_slopes(1).unwrap(), vec![1.0 / 256.0]);
        assert!(alibi_slopes(0).is_err());
    }

    #[test]
    fn non_power_of_two_heads() {
        let s = alibi_slopes(112).unwrap();
        assert_eq!(s.len(), 112);
        for i in 0..64 {
            let expect = libm::pow(2.0, -8.0 * (i + 1) as f64 / 64.0);
            assert!((s[i] - expect).abs() < 1e-15);
        }
        let s128 = alibi_slopes(128).unwrap();
        for j in 0..48 {
            assert!((s[64 + j] - s128[2 * j]).abs() < 1e-15);
        }
        assert!(s[..64].windows(2).all(|w| w[0] > w[1]));
        assert!(s[64..].windows(2).all(|w| w[0] > w[1]));
        // 3 heads: [2^-4, 2^-8] then the first odd entry of the 4-head sequence.
        assert_eq!(
            alibi_slopes(3).unwrap(),
            vec![1.0 / 16.0, 1.0 / 256.0, 0.25]
        );
    }

    #[test]
    fn causal_bias_entries() {
        let b = alibi_bias(5, 2).unwrap();
        // slopes for 2 heads: 2^-4, 2^-8
        for h in 0..2 {
            for q in 0..5 {
                assert_eq!(b.get(h, q, q), 0.0);
                for k in q + 1..5 {
                    assert_eq!(b.get(h, q, k), f64::NEG_INFINITY);
                }
            }
        }
        let b8 = alibi_bias(4, 1).unwrap();
        assert_eq!(b8.get(0, 3, 1), -2.0 / 256.0);
    }

    #[test]
    fn bias_depends_on_distance_only() {
        let heads = 6;
        let b = alibi_bias(12, heads).unwrap();
        let slopes = alibi_slopes(heads).unwrap();
        for h in 0..heads {
            for q in 0..12 {
                for k in 0..=q {
                    assert_eq!(b.get(h, q, k), b.get(h, q - k, 0));
                    assert_eq!(b.get(h, q, k), -slopes[h] * (q - k) as f64);
                }
            }
        }
        // first of 8 heads has slope 1/2
        let b = alibi_bias(4, 8).unwrap();
        assert_eq!(b.get(0, 3, 1), -1.0);
    }
}
