//! Row softmax on shares.

use crate::error::Result;
use crate::matrix::RingMatrix;
use crate::protocols::{add_public, mul_elem, scale_public};
use crate::ring::Ring;
use crate::runtime::PartyCtx;

use super::bits::relu;
use super::rsqrt::reciprocal;

/// Squarings in the limit approximation `exp(x) ≈ (1 + x/2^r)^(2^r)`.
pub const EXP_SQUARINGS: u32 = 6;

/// Row maxima by a pairwise tournament, `max(a, b) = b + relu(a - b)`.
pub fn row_max(ctx: &mut PartyCtx, y: &RingMatrix) -> Result<Vec<Ring>> {
    let mut cols: Vec<Vec<Ring>> = (0..y.cols()).map(|j| y.col(j)).collect();
    ctx.scoped("max", |ctx| {
        while cols.len() > 1 {
            let pairs = cols.len() / 2;
            let rows = y.rows();
            let mut diff = Vec::with_capacity(pairs * rows);
            for p in 0..pairs {
                diff.extend(cols[2 * p].iter().zip(&cols[2 * p + 1]).map(|(&a, &b)| a - b));
            }
            let r = relu(ctx, &diff)?;
            let mut next: Vec<Vec<Ring>> = (0..pairs)
                .map(|p| cols[2 * p + 1].iter().zip(&r[p * rows..(p + 1) * rows]).map(|(&b, &d)| b + d).collect())
                .collect();
            if cols.len() % 2 == 1 {
                next.push(cols.pop().expect("odd column"));
            }
            cols = next;
        }
        Ok(cols.pop().unwrap_or_default())
    })
}

/// Softmax of every row of a shared matrix.
pub fn softmax_rows(ctx: &mut PartyCtx, y: &RingMatrix) -> Result<RingMatrix> {
    let (n, c) = y.shape();
    if n == 0 || c == 0 {
        return Ok(y.clone());
    }
    let cfg = ctx.cfg();
    ctx.scoped("softmax", |ctx| {
        let mx = row_max(ctx, y)?;
        let shifted: Vec<Ring> = (0..n * c).map(|i| y.as_slice()[i] - mx[i / c]).collect();
        let base = add_public(ctx, &scale_public(ctx, &shifted, cfg.constant(0.5f64.powi(EXP_SQUARINGS as i32))), cfg.one());
        // Clamp at zero so very negative logits cannot flip sign when squared.
        let mut e = ctx.scoped("clamp", |c| relu(c, &base))?;
        ctx.scoped("exp", |ctx| {
            for _ in 0..EXP_SQUARINGS {
                e = mul_elem(ctx, &e, &e, true)?;
            }
            Ok::<_, crate::Error>(())
        })?;
        let sums: Vec<Ring> = (0..n).map(|r| e[r * c..(r + 1) * c].iter().copied().sum()).collect();
        let inv = reciprocal(ctx, &sums)?;
        let inv_b: Vec<Ring> = (0..n * c).map(|i| inv[i / c]).collect();
        let out = ctx.scoped("normalize", |c| mul_elem(c, &e, &inv_b, true))?;
        RingMatrix::from_vec(n, c, out)
    })
}
