//! Local linear maps of the factor chain. Each acts on the row dimension and is
//! broadcast over columns.

use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::ring::Ring;

/// Σ: prefix sums.
pub fn apply_sigma(v: &RingMatrix) -> RingMatrix {
    let mut out = v.clone();
    for i in 1..out.rows() {
        for j in 0..out.cols() {
            let acc = out.get(i - 1, j) + out.get(i, j);
            out.set(i, j, acc);
        }
    }
    out
}

/// Σᵀ: suffix sums.
pub fn apply_sigma_t(v: &RingMatrix) -> RingMatrix {
    let mut out = v.clone();
    for i in (0..out.rows().saturating_sub(1)).rev() {
        for j in 0..out.cols() {
            let acc = out.get(i + 1, j) + out.get(i, j);
            out.set(i, j, acc);
        }
    }
    out
}

/// δ: `(v1, v2 - v1, ..., vk - v(k-1))`. Inverse of Σ.
pub fn apply_delta(v: &RingMatrix) -> RingMatrix {
    RingMatrix::from_fn(v.rows(), v.cols(), |i, j| {
        if i == 0 {
            v.get(0, j)
        } else {
            v.get(i, j) - v.get(i - 1, j)
        }
    })
}

/// δᵀ: `(v1 - v2, ..., v(k-1) - vk, vk)`. Inverse of Σᵀ.
pub fn apply_delta_t(v: &RingMatrix) -> RingMatrix {
    let k = v.rows();
    RingMatrix::from_fn(k, v.cols(), |i, j| {
        if i + 1 == k {
            v.get(i, j)
        } else {
            v.get(i, j) - v.get(i + 1, j)
        }
    })
}

/// Zeroes every row at index `>= keep`.
pub fn mask_rows(v: &RingMatrix, keep: usize) -> RingMatrix {
    let mut out = v.clone();
    for i in keep.min(v.rows())..v.rows() {
        out.row_mut(i).fill(Ring::ZERO);
    }
    out
}

/// Γin (t x n): keep the first `ncol` of `n` rows, then zero-pad or cut to `t`.
pub fn apply_gamma_in(v: &RingMatrix, ncol: usize, t: usize) -> RingMatrix {
    mask_rows(v, ncol).resize_rows(t)
}

/// Γinᵀ (n x t).
pub fn apply_gamma_in_t(v: &RingMatrix, ncol: usize, n: usize) -> RingMatrix {
    mask_rows(&v.resize_rows(n), ncol)
}

/// Γout (m x t): resize `t` rows to `m`, then keep the first `nrow`.
pub fn apply_gamma_out(v: &RingMatrix, nrow: usize, m: usize) -> RingMatrix {
    mask_rows(&v.resize_rows(m), nrow)
}

/// Γoutᵀ (t x m).
pub fn apply_gamma_out_t(v: &RingMatrix, nrow: usize, t: usize) -> RingMatrix {
    mask_rows(v, nrow).resize_rows(t)
}

/// Λ: scales row `i` by `lambda[i]`.
pub fn apply_lambda(v: &RingMatrix, lambda: &[Ring]) -> Result<RingMatrix> {
    if lambda.len() != v.rows() {
        return Err(Error::Shape(format!("{} weights for {} rows", lambda.len(), v.rows())));
    }
    let mut out = v.clone();
    for (i, &l) in lambda.iter().enumerate() {
        for x in out.row_mut(i) {
            *x *= l;
        }
    }
    Ok(out)
}
