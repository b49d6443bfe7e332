//! Gradient steps on shared parameters, plus the float recurrences they follow.

use crate::error::Result;
use crate::matrix::{Matrix, RingMatrix};
use crate::protocols::{mul_elem, scale_public};
use crate::ring::{truncate_vec, Ring};
use crate::runtime::PartyCtx;

use super::rsqrt::rsqrt_eps_scaled;

/// `W - η·G`, local.
pub fn sgd_step(ctx: &PartyCtx, w: &RingMatrix, g: &RingMatrix, eta: f64) -> Result<RingMatrix> {
    w.check_same_shape(g)?;
    let step = scale_public(ctx, g.as_slice(), ctx.cfg().constant(eta));
    let out = w.as_slice().iter().zip(&step).map(|(&a, &b)| a - b).collect();
    RingMatrix::from_vec(w.rows(), w.cols(), out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { eta: 0.001, beta1: 0.9, beta2: 0.999, eps: 2f64.powi(-6) }
    }
}

/// Extra fractional bits carried by the second moment, which is small
/// compared to one unit in the last place at the working precision.
pub const V_EXTRA_BITS: u32 = 8;

/// Shares of the moments of one parameter matrix; `v` is held scaled by
/// `2^V_EXTRA_BITS`. No bias correction is applied.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub params: AdamParams,
    pub u: RingMatrix,
    pub v: RingMatrix,
    pub t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, params: AdamParams) -> Self {
        AdamState { params, u: RingMatrix::zeros(rows, cols), v: RingMatrix::zeros(rows, cols), t: 0 }
    }
}

fn blend(ctx: &PartyCtx, a: &[Ring], wa: f64, b: &[Ring], wb: f64) -> Vec<Ring> {
    let cfg = ctx.cfg();
    let x = scale_public(ctx, a, cfg.constant(wa));
    let y = scale_public(ctx, b, cfg.constant(wb));
    x.iter().zip(&y).map(|(&p, &q)| p + q).collect()
}

/// `u ← β1·u + (1-β1)·g`, `v ← β2·v + (1-β2)·g²`, `W ← W - η·u/√(v + ε²)`.
pub fn adam_step(ctx: &mut PartyCtx, state: &mut AdamState, w: &RingMatrix, g: &RingMatrix) -> Result<RingMatrix> {
    w.check_same_shape(g)?;
    state.u.check_same_shape(g)?;
    let p = state.params;
    ctx.scoped("adam", |ctx| {
        let g2 = ctx.scoped("square", |c| mul_elem(c, g.as_slice(), g.as_slice(), true))?;
        let u = blend(ctx, state.u.as_slice(), p.beta1, g.as_slice(), 1.0 - p.beta1);
        let f = ctx.cfg().frac_bits;
        let c2 = Ring::from_i64(((1.0 - p.beta2) * 2f64.powi(2 * f as i32)).round() as i64);
        let mut fresh: Vec<Ring> = g2.iter().map(|&x| x * c2).collect();
        truncate_vec(ctx.id(), &mut fresh, 2 * f - V_EXTRA_BITS);
        let decayed = scale_public(ctx, state.v.as_slice(), ctx.cfg().constant(p.beta2));
        let v: Vec<Ring> = decayed.iter().zip(&fresh).map(|(&a, &b)| a + b).collect();
        let r = rsqrt_eps_scaled(ctx, &v, V_EXTRA_BITS, p.eps)?;
        let dir = ctx.scoped("direction", |c| mul_elem(c, &u, &r, true))?;
        state.u = RingMatrix::from_vec(w.rows(), w.cols(), u)?;
        state.v = RingMatrix::from_vec(w.rows(), w.cols(), v)?;
        state.t += 1;
        sgd_step(ctx, w, &RingMatrix::from_vec(w.rows(), w.cols(), dir)?, p.eta)
    })
}

/// The same Adam recurrence in floats.
#[derive(Clone, Debug)]
pub struct ClearAdam {
    pub params: AdamParams,
    pub u: Matrix<f64>,
    pub v: Matrix<f64>,
    pub t: u64,
}

impl ClearAdam {
    pub fn new(rows: usize, cols: usize, params: AdamParams) -> Self {
        ClearAdam { params, u: Matrix::zeros(rows, cols), v: Matrix::zeros(rows, cols), t: 0 }
    }

    pub fn step(&mut self, w: &mut Matrix<f64>, g: &Matrix<f64>) {
        let p = self.params;
        let ws = w.as_mut_slice();
        let (us, vs) = (self.u.as_mut_slice(), self.v.as_mut_slice());
        for (i, &gi) in g.as_slice().iter().enumerate() {
            us[i] = p.beta1 * us[i] + (1.0 - p.beta1) * gi;
            vs[i] = p.beta2 * vs[i] + (1.0 - p.beta2) * gi * gi;
            ws[i] -= p.eta * us[i] / (vs[i] + p.eps * p.eps).sqrt();
        }
        self.t += 1;
    }
}

pub fn clear_sgd(w: &mut Matrix<f64>, g: &Matrix<f64>, eta: f64) {
    for (a, b) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *a -= eta * b;
    }
}
