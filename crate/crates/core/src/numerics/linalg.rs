//! Row-major matrix products used by the model's forward and backward passes.
//!
//! Shapes are passed explicitly; callers own the buffers. All `*_acc`
//! variants add into `out` rather than overwrite.

/// `out[m,n] = a[m,k] * b[k,n]`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    out[..m * n].iter_mut().for_each(|x| *x = 0.0);
    matmul_acc(a, b, m, k, n, out);
}

/// `out[m,n] += a[m,k] * b[k,n]`
pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && out.len() >= m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += s * bv;
            }
        }
    }
}

/// `out[k,n] += a[m,k]^T * b[m,n]` (weight gradient of `a * W`).
pub fn matmul_at_b_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= m * n && out.len() >= k * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let s = a[i * k + p];
            if s == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += s * bv;
            }
        }
    }
}

/// `out[m,k] += a[m,n] * b[k,n]^T` (input gradient of `x * W`).
pub fn matmul_a_bt_acc(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    debug_assert!(a.len() >= m * n && b.len() >= k * n && out.len() >= m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            out[i * k + p] += dot(a_row, b_row);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adds `bias[n]` to every row of `out[m,n]`.
pub fn add_row_bias(out: &mut [f64], bias: &[f64]) {
    let n = bias.len();
    for row in out.chunks_exact_mut(n) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// Column sums of `g[m,n]` added into `out[n]` (bias gradient).
pub fn sum_rows_acc(g: &[f64], n: usize, out: &mut [f64]) {
    for row in g.chunks_exact(n) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}
