//! Secure sparse-times-dense multiplication: the factor chain of a
//! [`DecompositionBundle`] evaluated step by step on shares. Party 0 holds the
//! bundle; party 1 knows only the public shape.

use serde::{Deserialize, Serialize};

use crate::decompose::linear::{apply_delta, apply_delta_t, apply_sigma, apply_sigma_t};
use crate::decompose::{DecompositionBundle, Permutation};
use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::protocols::{op_plain, op_shared, priv_mult_rows, select_prefix};
use crate::ring::{truncate_vec, Ring, RING_BITS};
use crate::runtime::PartyCtx;

/// What both parties know about the sparse matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmmShape {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub frac_bits: u32,
}

impl From<&DecompositionBundle> for SmmShape {
    fn from(b: &DecompositionBundle) -> Self {
        SmmShape { m: b.m, n: b.n, t: b.t, frac_bits: b.frac_bits }
    }
}

impl SmmShape {
    /// Online payload bits of one call with `d` columns.
    pub fn online_bits(&self, d: usize) -> u64 {
        let (m, n, t) = (self.m as u64, self.n as u64, self.t as u64);
        let lg = |k: usize| Permutation::index_bits(k) as u64;
        let l = RING_BITS as u64;
        ((5 * t + 2 * m + 2 * n) * l + 3 * t * lg(self.t) + m * lg(self.m) + n * lg(self.n) + m + n) * d as u64
    }

    /// Offline (dealer correction) bits of one call with `d` columns.
    pub fn offline_bits(&self, d: usize) -> u64 {
        2 * (2 * self.t + self.m + self.n) as u64 * d as u64 * RING_BITS as u64
    }

    pub const ROUNDS: u64 = 8;
}

/// How the dense operand is held.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operand {
    /// Plaintext owned by party 1; party 0 passes a matrix of the right shape.
    Plain,
    Shared,
}

struct Party0<'a>(Option<&'a DecompositionBundle>);

impl<'a> Party0<'a> {
    fn perm(&self, f: impl Fn(&DecompositionBundle) -> Permutation) -> Option<Permutation> {
        self.0.map(f)
    }
}

fn check(ctx: &PartyCtx, bundle: Option<&DecompositionBundle>, shape: &SmmShape) -> Result<()> {
    if ctx.is_p0() {
        let b = bundle.ok_or_else(|| Error::Protocol("party 0 must hold the decomposition".into()))?;
        if SmmShape::from(b) != *shape {
            return Err(Error::Shape("bundle does not match the announced shape".into()));
        }
    }
    Ok(())
}

fn rescale(ctx: &PartyCtx, y: &mut RingMatrix, frac_bits: u32) {
    if frac_bits > 0 {
        truncate_vec(ctx.id(), y.as_mut_slice(), frac_bits);
    }
}

/// Shares of `A·X` for an `n x d` operand.
pub fn smm(
    ctx: &mut PartyCtx,
    bundle: Option<&DecompositionBundle>,
    shape: SmmShape,
    x: &RingMatrix,
    operand: Operand,
) -> Result<RingMatrix> {
    check(ctx, bundle, &shape)?;
    if x.rows() != shape.n {
        return Err(Error::Shape(format!("operand has {} rows, A has {} columns", x.rows(), shape.n)));
    }
    let p0 = Party0(bundle);
    let SmmShape { m, t, frac_bits, .. } = shape;
    ctx.scoped("smm", |ctx| {
        let s1 = p0.perm(|b| b.sigma1.clone());
        let y = ctx.scoped("op-sigma1", |c| match operand {
            Operand::Plain => op_plain(c, s1.as_ref(), x),
            Operand::Shared => op_shared(c, s1.as_ref(), x),
        })?;
        let y = apply_delta(&y);
        let y = ctx.scoped("osm-gamma-in", |c| select_prefix(c, p0.0.map(|b| b.ncol), &y))?.resize_rows(t);
        let s2 = p0.perm(|b| b.sigma2.clone());
        let y = ctx.scoped("op-sigma2", |c| op_shared(c, s2.as_ref(), &y))?;
        let y = apply_sigma(&y);
        let s3 = p0.perm(|b| b.sigma3.clone());
        let y = ctx.scoped("op-sigma3", |c| op_shared(c, s3.as_ref(), &y))?;
        let mut y = ctx.scoped("mult-lambda", |c| priv_mult_rows(c, p0.0.map(|b| b.lambda.as_slice()), &y))?;
        rescale(ctx, &mut y, frac_bits);
        let y = apply_sigma_t(&y);
        let s4 = p0.perm(|b| b.sigma4.clone());
        let y = ctx.scoped("op-sigma4", |c| op_shared(c, s4.as_ref(), &y))?.resize_rows(m);
        let y = ctx.scoped("osm-gamma-out", |c| select_prefix(c, p0.0.map(|b| b.nrow), &y))?;
        let y = apply_delta_t(&y);
        let s5 = p0.perm(|b| b.sigma5.clone());
        ctx.scoped("op-sigma5", |c| op_shared(c, s5.as_ref(), &y))
    })
}

/// Shares of `Aᵀ·G` for a shared `m x d` operand, using the transposed chain
/// of the same bundle.
pub fn smm_transpose(
    ctx: &mut PartyCtx,
    bundle: Option<&DecompositionBundle>,
    shape: SmmShape,
    g: &RingMatrix,
) -> Result<RingMatrix> {
    check(ctx, bundle, &shape)?;
    if g.rows() != shape.m {
        return Err(Error::Shape(format!("operand has {} rows, A has {} rows", g.rows(), shape.m)));
    }
    let p0 = Party0(bundle);
    let SmmShape { n, t, frac_bits, .. } = shape;
    ctx.scoped("smm-t", |ctx| {
        let s5 = p0.perm(|b| b.sigma5.inverse());
        let y = ctx.scoped("op-sigma5", |c| op_shared(c, s5.as_ref(), g))?;
        let y = apply_delta(&y);
        let y = ctx.scoped("osm-gamma-out", |c| select_prefix(c, p0.0.map(|b| b.nrow), &y))?.resize_rows(t);
        let s4 = p0.perm(|b| b.sigma4.inverse());
        let y = ctx.scoped("op-sigma4", |c| op_shared(c, s4.as_ref(), &y))?;
        let y = apply_sigma(&y);
        let mut y = ctx.scoped("mult-lambda", |c| priv_mult_rows(c, p0.0.map(|b| b.lambda.as_slice()), &y))?;
        rescale(ctx, &mut y, frac_bits);
        let s3 = p0.perm(|b| b.sigma3.inverse());
        let y = ctx.scoped("op-sigma3", |c| op_shared(c, s3.as_ref(), &y))?;
        let y = apply_sigma_t(&y);
        let s2 = p0.perm(|b| b.sigma2.inverse());
        let y = ctx.scoped("op-sigma2", |c| op_shared(c, s2.as_ref(), &y))?.resize_rows(n);
        let y = ctx.scoped("osm-gamma-in", |c| select_prefix(c, p0.0.map(|b| b.ncol), &y))?;
        let y = apply_delta_t(&y);
        let s1 = p0.perm(|b| b.sigma1.inverse());
        ctx.scoped("op-sigma1", |c| op_shared(c, s1.as_ref(), &y))
    })
}

/// Shares of `X·A` for a shared `d x m` operand.
pub fn smm_left(
    ctx: &mut PartyCtx,
    bundle: Option<&DecompositionBundle>,
    shape: SmmShape,
    x: &RingMatrix,
) -> Result<RingMatrix> {
    if x.cols() != shape.m {
        return Err(Error::Shape(format!("operand has {} columns, A has {} rows", x.cols(), shape.m)));
    }
    Ok(smm_transpose(ctx, bundle, shape, &x.transpose())?.transpose())
}

/// Online bits of the dense Beaver baseline for an `m x n` by `n x d` product
/// where both operands are shared: each party opens its masked shares of both.
pub fn dense_beaver_online_bits(m: usize, n: usize, d: usize) -> u64 {
    2 * (m * n + n * d) as u64 * RING_BITS as u64
}

/// Convenience: the zero share of the right shape for party 0's plain-operand slot.
pub fn placeholder(rows: usize, cols: usize) -> RingMatrix {
    RingMatrix::from_fn(rows, cols, |_, _| Ring::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{Dealer, LiveSource};
    use crate::decompose::{decompose_full, SparseMatrixCoo};
    use crate::protocols::matmul;
    use crate::ring::{share_vec, FixedPointConfig};
    use crate::runtime::{run_two_party, CommMeter};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn random_sparse(m: usize, n: usize, t: usize, rng: &mut StdRng) -> SparseMatrixCoo {
        let mut cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        rand::seq::SliceRandom::shuffle(cells.as_mut_slice(), rng);
        let triples = cells[..t].iter().map(|&(i, j)| (i, j, Ring::from_i64(rng.gen_range(-9..=9).max(1)))).collect();
        SparseMatrixCoo::new(m, n, triples, 0).unwrap()
    }

    fn int_matrix(r: usize, c: usize, rng: &mut StdRng) -> RingMatrix {
        RingMatrix::from_fn(r, c, |_, _| Ring::from_i64(rng.gen_range(-1000..1000)))
    }

    fn shared(m: &RingMatrix, rng: &mut StdRng) -> (RingMatrix, RingMatrix) {
        let (a, b) = share_vec(m.as_slice(), rng);
        (RingMatrix::from_vec(m.rows(), m.cols(), a).unwrap(), RingMatrix::from_vec(m.rows(), m.cols(), b).unwrap())
    }

    fn run_smm(b: &DecompositionBundle, x: &RingMatrix, seed: u64) -> (RingMatrix, CommMeter) {
        let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
        let shape = SmmShape::from(b);
        let ph = placeholder(x.rows(), x.cols());
        let (a, c, m) = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |ctx| smm(ctx, Some(b), shape, &ph, Operand::Plain),
            |ctx| smm(ctx, None, shape, x, Operand::Plain),
        )
        .unwrap();
        (a.add(&c).unwrap(), m)
    }

    fn run_transpose(b: &DecompositionBundle, g: &RingMatrix, left: bool, seed: u64) -> (RingMatrix, CommMeter) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (g0, g1) = shared(g, &mut rng);
        let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
        let shape = SmmShape::from(b);
        let f = |ctx: &mut PartyCtx, bb: Option<&DecompositionBundle>, x: &RingMatrix| {
            if left {
                smm_left(ctx, bb, shape, x)
            } else {
                smm_transpose(ctx, bb, shape, x)
            }
        };
        let (a, c, m) =
            run_two_party(FixedPointConfig::default(), &mut s0, &mut s1, |ctx| f(ctx, Some(b), &g0), |ctx| f(ctx, None, &g1))
                .unwrap();
        (a.add(&c).unwrap(), m)
    }

    #[test]
    fn identity_returns_input() {
        let mut rng = StdRng::seed_from_u64(1);
        let b = decompose_full(&SparseMatrixCoo::identity(6, 0)).unwrap();
        let x = int_matrix(6, 2, &mut rng);
        assert_eq!(run_smm(&b, &x, 1).0, x);
        assert_eq!(run_transpose(&b, &x, false, 2).0, x);
        assert_eq!(run_transpose(&b, &x.transpose(), true, 3).0, x.transpose());
    }

    #[test]
    fn random_instances_exact_with_formula_costs() {
        let mut rng = StdRng::seed_from_u64(2);
        for trial in 0..30 {
            let t = rng.gen_range(1..=40);
            let a = random_sparse(16, 16, t, &mut rng);
            let b = decompose_full(&a).unwrap();
            let d = rng.gen_range(1..=3);
            let x = int_matrix(16, d, &mut rng);
            let (got, m) = run_smm(&b, &x, trial);
            assert_eq!(got, a.to_dense().matmul(&x).unwrap());
            let shape = SmmShape::from(&b);
            assert_eq!(m.rounds, SmmShape::ROUNDS);
            assert_eq!(m.online_bits, shape.online_bits(d));
            assert_eq!(m.offline_bits, shape.offline_bits(d));
        }
    }

    #[test]
    fn rectangular_and_transposed() {
        let mut rng = StdRng::seed_from_u64(3);
        for trial in 0..30 {
            let (mm, nn) = (rng.gen_range(1..12), rng.gen_range(1..12));
            let t = rng.gen_range(1..=mm * nn);
            let a = random_sparse(mm, nn, t, &mut rng);
            let b = decompose_full(&a).unwrap();
            let x = int_matrix(nn, 2, &mut rng);
            assert_eq!(run_smm(&b, &x, trial).0, a.to_dense().matmul(&x).unwrap());
            let g = int_matrix(mm, 2, &mut rng);
            let (got, m) = run_transpose(&b, &g, false, trial);
            assert_eq!(got, a.to_dense().transpose().matmul(&g).unwrap());
            assert_eq!(m.rounds, 8);
            assert_eq!(m.online_bits, SmmShape::from(&b).online_bits(2));
            let xl = int_matrix(2, mm, &mut rng);
            let (got, _) = run_transpose(&b, &xl, true, trial);
            assert_eq!(got, xl.matmul(&a.to_dense()).unwrap());
            // Duality: X·A equals (Aᵀ Xᵀ)ᵀ computed from a fresh decomposition of Aᵀ.
            let bt = decompose_full(&a.transpose()).unwrap();
            assert_eq!(run_smm(&bt, &xl.transpose(), trial).0.transpose(), got);
        }
    }

    #[test]
    fn zero_operand() {
        let mut rng = StdRng::seed_from_u64(4);
        let a = random_sparse(8, 8, 10, &mut rng);
        let b = decompose_full(&a).unwrap();
        assert_eq!(run_smm(&b, &RingMatrix::zeros(8, 2), 4).0, RingMatrix::zeros(8, 2));
    }

    #[test]
    fn fixed_point_weights() {
        let f = FixedPointConfig::default();
        let a = SparseMatrixCoo::parse_text("3 3 4\n1 1 0.5\n1 3 0.25\n2 2 -1.5\n3 1 0.125\n", f).unwrap();
        let b = decompose_full(&a).unwrap();
        let xf = [[1.0, -2.0], [3.5, 0.25], [-4.0, 8.0]];
        let x = RingMatrix::from_fn(3, 2, |i, j| f.encode(xf[i][j]).unwrap());
        let got = run_smm(&b, &x, 5).0.map(|v| f.decode(v));
        let want = a.to_dense_f64().matmul(&x.map(|v| f.decode(v))).unwrap();
        assert!(got.max_abs_diff(&want) <= 2.0 * 2f64.powi(-16));
    }

    #[test]
    fn transcript_independent_of_topology() {
        let e1 = (0..10).map(|i| (i, (i + 1) % 10, Ring::ONE)).collect();
        let e2 = (0..10).map(|i| (i, (i * 3 + 7) % 10, Ring::ONE)).collect();
        let a1 = decompose_full(&SparseMatrixCoo::new(10, 10, e1, 0).unwrap()).unwrap();
        let a2 = decompose_full(&SparseMatrixCoo::new(10, 10, e2, 0).unwrap()).unwrap();
        let x = RingMatrix::zeros(10, 3);
        let (_, m1) = run_smm(&a1, &x, 6);
        let (_, m2) = run_smm(&a2, &x, 7);
        assert_eq!(m1.by_label, m2.by_label);
    }

    #[test]
    fn dense_baseline_formula_matches_measurement() {
        let mut rng = StdRng::seed_from_u64(8);
        let (m, n, d) = (6, 5, 2);
        let a = int_matrix(m, n, &mut rng);
        let x = int_matrix(n, d, &mut rng);
        let (a0, a1) = shared(&a, &mut rng);
        let (x0, x1) = shared(&x, &mut rng);
        let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(8)), 0);
        let (z0, z1, meter) = run_two_party(
            FixedPointConfig::default(),
            &mut s0,
            &mut s1,
            |c| matmul(c, &a0, &x0, false),
            |c| matmul(c, &a1, &x1, false),
        )
        .unwrap();
        assert_eq!(z0.add(&z1).unwrap(), a.matmul(&x).unwrap());
        assert_eq!(meter.online_bits, dense_beaver_online_bits(m, n, d));
    }
}
