//! Reciprocal square root on shares: split `x = x'·2^e` with `x'` in `[1, 2)`
//! using the one-hot of the top bit, approximate `1/√x'` with a quadratic and
//! `2^(-e/2)` with a table over the one-hot positions.

use crate::error::Result;
use crate::matrix::RingMatrix;
use crate::protocols::{add_public, mul_elem, mux_shared_bit, scale_public};
use crate::ring::Ring;
use crate::runtime::PartyCtx;

use super::bits::highest_one_hot;

/// Quadratic fit of `1/√m` on `[1, 2]`, in the variable `m/4`, halved.
pub const POLY_A: f64 = 4.63887;
pub const POLY_B: f64 = 5.77789;
pub const POLY_C: f64 = 3.14736;

/// The fit rewritten in `m`: `a'm² - b'm + c'`.
pub fn poly_coefficients() -> (f64, f64, f64) {
    (POLY_A / 32.0, POLY_B / 8.0, POLY_C / 2.0)
}

pub fn poly_clear(m: f64) -> f64 {
    (POLY_A * (m / 4.0).powi(2) - POLY_B * (m / 4.0) + POLY_C) / 2.0
}

/// Highest one-hot position handled: values up to `2^(f+1)`.
fn max_position(f: u32) -> usize {
    (2 * f as usize).min(63)
}

/// `1/√(2^(k-f))` for the shared one-hot `y` (one row per element, 64 columns).
/// Positions are reversed to `p = 2f - k = 4i + j`; the partial sums
/// `z[j] = Σ_i y·2^(i - f/4)` are combined with `2^(j/4)` into
/// `w = 2^((f-k)/4)`, which is then squared.
pub fn rsqrt_pow2(ctx: &mut PartyCtx, y: &RingMatrix) -> Result<Vec<Ring>> {
    let cfg = ctx.cfg();
    cfg.require_rsqrt_compatible()?;
    let f = cfg.frac_bits as i32;
    let coeffs: Vec<Ring> = (0..4).map(|j| cfg.constant(2f64.powf(j as f64 / 4.0))).collect();
    let mut w = Vec::with_capacity(y.rows());
    for e in 0..y.rows() {
        let row = y.row(e);
        let mut z = [Ring::ZERO; 4];
        for (k, &yk) in row.iter().enumerate().take(max_position(cfg.frac_bits) + 1) {
            let p = 2 * f - k as i32;
            let (i, j) = (p / 4, (p % 4) as usize);
            z[j] += yk * cfg.constant(2f64.powi(i - f / 4));
        }
        w.push((0..4).map(|j| z[j] * coeffs[j]).sum::<Ring>());
    }
    ctx.truncate(&mut w);
    ctx.scoped("square", |c| mul_elem(c, &w, &w, true))
}

/// Rsqrt given the one-hot of `x`.
fn rsqrt_from_one_hot(ctx: &mut PartyCtx, x: &[Ring], y: &RingMatrix) -> Result<Vec<Ring>> {
    let f = ctx.cfg().frac_bits;
    let top = max_position(f);
    // Shared integer 2^(2f-k), the fixed-point encoding of 2^(f-k).
    let shift: Vec<Ring> = (0..y.rows())
        .map(|e| y.row(e).iter().enumerate().take(top + 1).map(|(k, &yk)| yk * Ring(1u64 << (2 * f as usize - k))).sum())
        .collect();
    let xn = ctx.scoped("normalize", |c| mul_elem(c, x, &shift, true))?;
    let (a, b, cc) = poly_coefficients();
    let cfg = ctx.cfg();
    let sq = ctx.scoped("poly", |c| mul_elem(c, &xn, &xn, true))?;
    let t2 = scale_public(ctx, &sq, cfg.constant(a));
    let t1 = scale_public(ctx, &xn, cfg.constant(b));
    let z: Vec<Ring> = add_public(ctx, &t2.iter().zip(&t1).map(|(&p, &q)| p - q).collect::<Vec<_>>(), cfg.constant(cc));
    let v = ctx.scoped("pow2", |c| rsqrt_pow2(c, y))?;
    ctx.scoped("combine", |c| mul_elem(c, &z, &v, true))
}

/// `1/√x` for shared `x > 0` in roughly `[2^-f, 2^(f+1))`.
pub fn rsqrt(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<Ring>> {
    ctx.scoped("rsqrt", |ctx| {
        let y = highest_one_hot(ctx, x)?;
        rsqrt_from_one_hot(ctx, x, &y)
    })
}

/// Extra fractional bits used inside [`rsqrt_eps`] so that small `ε²` survive
/// encoding. Inputs must stay below `2^(f+1-EPS_EXTRA_BITS)`.
pub const EPS_EXTRA_BITS: u32 = 8;

/// `1/√(v + ε²)`, falling back to the public `1/ε` when `v + ε²` is zero in
/// fixed point.
pub fn rsqrt_eps(ctx: &mut PartyCtx, v: &[Ring], eps: f64) -> Result<Vec<Ring>> {
    let shifted: Vec<Ring> = v.iter().map(|&x| Ring(x.0 << EPS_EXTRA_BITS)).collect();
    rsqrt_eps_scaled(ctx, &shifted, EPS_EXTRA_BITS, eps)
}

/// [`rsqrt_eps`] for `v` held with `extra` more fractional bits than the
/// working precision (`extra` even). The output is at the working precision.
pub fn rsqrt_eps_scaled(ctx: &mut PartyCtx, v: &[Ring], extra: u32, eps: f64) -> Result<Vec<Ring>> {
    if extra % 2 != 0 {
        return Err(crate::Error::Config(format!("extra fractional bits must be even, got {extra}")));
    }
    let cfg = ctx.cfg();
    ctx.scoped("rsqrt-eps", |ctx| {
        let e2 = Ring::from_i64((eps * eps * 2f64.powi((cfg.frac_bits + extra) as i32)).round() as i64);
        let x = add_public(ctx, v, e2);
        let y = highest_one_hot(ctx, &x)?;
        let nonzero: Vec<Ring> = (0..y.rows()).map(|e| y.row(e).iter().copied().sum()).collect();
        // 1/√(2^extra·x) = 2^(-extra/2)/√x.
        let half = Ring(1u64 << (extra / 2));
        let r: Vec<Ring> = rsqrt_from_one_hot(ctx, &x, &y)?.into_iter().map(|r| r * half).collect();
        ctx.scoped("select", |c| mux_shared_bit(c, &nonzero, &r, cfg.constant(1.0 / eps)))
    })
}

/// `1/x` for shared `x > 0`, as the square of the reciprocal square root.
pub fn reciprocal(ctx: &mut PartyCtx, x: &[Ring]) -> Result<Vec<Ring>> {
    let r = rsqrt(ctx, x)?;
    ctx.scoped("reciprocal", |c| mul_elem(c, &r, &r, true))
}
