//! Sparse matrix decomposition into the factor chain
//! `A = σ5 δmᵀ Γout σ4 Σᵀ Λ σ3 Σ σ2 Γin δn σ1`.

mod coo;
pub mod linear;
mod perm;

pub use coo::{Entry, SparseMatrixCoo};
pub use perm::{pad_perm, Permutation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::ring::Ring;
use linear::*;

/// `A = P · diag(Λ) · σ3 · Q` with `P` P-type and `Q` Q-type.
#[derive(Clone, Debug)]
pub struct RowColumnSplit {
    pub p: SparseMatrixCoo,
    pub lambda: Vec<Ring>,
    pub sigma3: Permutation,
    pub q: SparseMatrixCoo,
}

/// `Q = Σ σ2 Γin δn σ1`.
#[derive(Clone, Debug, PartialEq)]
pub struct QFactors {
    pub sigma2: Permutation,
    pub ncol: usize,
    pub sigma1: Permutation,
}

/// `P = σ5 δmᵀ Γout σ4 Σᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PFactors {
    pub sigma5: Permutation,
    pub nrow: usize,
    pub sigma4: Permutation,
}

pub fn decompose_row_column(a: &SparseMatrixCoo) -> Result<RowColumnSplit> {
    let t = a.nnz();
    if t == 0 {
        return Err(Error::EmptyMatrix);
    }
    let entries = a.entries();
    // Entries are already in row order, so P's column c is entry c.
    let p = SparseMatrixCoo::new(a.rows(), t, entries.iter().enumerate().map(|(c, e)| (e.row, c, Ring::ONE)).collect(), 0)?;
    let lambda = a.weights();
    let mut by_col: Vec<usize> = (0..t).collect();
    by_col.sort_by_key(|&c| entries[c].col);
    let q = SparseMatrixCoo::new(
        t,
        a.cols(),
        by_col.iter().enumerate().map(|(r, &c)| (r, entries[c].col, Ring::ONE)).collect(),
        0,
    )?;
    let sigma3 = Permutation::from_vec(by_col)?.inverse();
    Ok(RowColumnSplit { p, lambda, sigma3, q })
}

pub fn decompose_q(q: &SparseMatrixCoo) -> Result<QFactors> {
    q.check_q_type()?;
    let (t, n) = (q.rows(), q.cols());
    let mut firsts: Vec<(usize, usize)> = Vec::new(); // (step row, column)
    for (r, e) in q.entries().iter().enumerate() {
        if firsts.last().is_none_or(|&(_, c)| c != e.col) {
            firsts.push((r, e.col));
        }
    }
    let ncol = firsts.len();
    let sigma1 = pad_perm(&firsts.iter().enumerate().map(|(c, &(_, col))| (c, col)).collect::<Vec<_>>(), n)?;
    let sigma2 = pad_perm(&firsts.iter().enumerate().map(|(c, &(row, _))| (row, c)).collect::<Vec<_>>(), t)?;
    Ok(QFactors { sigma2, ncol, sigma1 })
}

pub fn decompose_p(p: &SparseMatrixCoo) -> Result<PFactors> {
    p.check_p_type()?;
    let f = decompose_q(&p.transpose())?;
    Ok(PFactors { sigma5: f.sigma1.inverse(), nrow: f.ncol, sigma4: f.sigma2.inverse() })
}

pub fn decompose_full(a: &SparseMatrixCoo) -> Result<DecompositionBundle> {
    let split = decompose_row_column(a)?;
    let qf = decompose_q(&split.q)?;
    let pf = decompose_p(&split.p)?;
    Ok(DecompositionBundle {
        m: a.rows(),
        n: a.cols(),
        t: a.nnz(),
        sigma1: qf.sigma1,
        sigma2: qf.sigma2,
        sigma3: split.sigma3,
        sigma4: pf.sigma4,
        sigma5: pf.sigma5,
        ncol: qf.ncol,
        nrow: pf.nrow,
        lambda: split.lambda,
        frac_bits: a.frac_bits(),
    })
}

/// The factors of one sparse matrix. Held by the graph owner (party 0).
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionBundle {
    pub m: usize,
    pub n: usize,
    pub t: usize,
    pub sigma1: Permutation,
    pub sigma2: Permutation,
    pub sigma3: Permutation,
    pub sigma4: Permutation,
    pub sigma5: Permutation,
    pub ncol: usize,
    pub nrow: usize,
    pub lambda: Vec<Ring>,
    /// Scaling of `lambda`; 0 for integer weights.
    pub frac_bits: u32,
}

impl DecompositionBundle {
    fn scale_lambda(&self, y: &RingMatrix, truncate: bool) -> Result<RingMatrix> {
        let y = apply_lambda(y, &self.lambda)?;
        if truncate && self.frac_bits > 0 {
            Ok(y.map(|x| Ring::from_i64(x.as_i64() >> self.frac_bits)))
        } else {
            Ok(y)
        }
    }

    /// Evaluates `A·X` in the clear by walking the factor chain. With
    /// `truncate`, the Λ step rescales fixed-point weights.
    pub fn apply_plain(&self, x: &RingMatrix, truncate: bool) -> Result<RingMatrix> {
        if x.rows() != self.n {
            return Err(Error::Shape(format!("A is {}x{}, X has {} rows", self.m, self.n, x.rows())));
        }
        let y = self.sigma1.apply_rows(x)?;
        let y = apply_gamma_in(&apply_delta(&y), self.ncol, self.t);
        let y = apply_sigma(&self.sigma2.apply_rows(&y)?);
        let y = self.scale_lambda(&self.sigma3.apply_rows(&y)?, truncate)?;
        let y = self.sigma4.apply_rows(&apply_sigma_t(&y))?;
        let y = apply_delta_t(&apply_gamma_out(&y, self.nrow, self.m));
        self.sigma5.apply_rows(&y)
    }

    /// Evaluates `Aᵀ·G` with the transposed chain.
    pub fn apply_plain_transpose(&self, g: &RingMatrix, truncate: bool) -> Result<RingMatrix> {
        if g.rows() != self.m {
            return Err(Error::Shape(format!("A is {}x{}, G has {} rows", self.m, self.n, g.rows())));
        }
        let y = self.sigma5.inverse().apply_rows(g)?;
        let y = apply_gamma_out_t(&apply_delta(&y), self.nrow, self.t);
        let y = apply_sigma(&self.sigma4.inverse().apply_rows(&y)?);
        let y = self.sigma3.inverse().apply_rows(&self.scale_lambda(&y, truncate)?)?;
        let y = self.sigma2.inverse().apply_rows(&apply_sigma_t(&y))?;
        let y = apply_delta_t(&apply_gamma_in_t(&y, self.ncol, self.n));
        self.sigma1.inverse().apply_rows(&y)
    }

    /// Rebuilds the dense matrix (raw ring weights).
    pub fn reconstruct_dense(&self) -> Result<RingMatrix> {
        let id = RingMatrix::from_fn(self.n, self.n, |i, j| Ring((i == j) as u64));
        self.apply_plain(&id, false)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BundleFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<BundleFile>(s)?.try_into()
    }
}

/// On-disk form: 1-based one-line permutations, Λ as signed fixed-point integers.
#[derive(Serialize, Deserialize)]
struct BundleFile {
    m: usize,
    n: usize,
    t: usize,
    ncol: usize,
    nrow: usize,
    frac_bits: u32,
    sigma1: Vec<usize>,
    sigma2: Vec<usize>,
    sigma3: Vec<usize>,
    sigma4: Vec<usize>,
    sigma5: Vec<usize>,
    lambda: Vec<i64>,
}

fn one_based(p: &Permutation) -> Vec<usize> {
    p.as_slice().iter().map(|&i| i + 1).collect()
}

fn zero_based(v: Vec<usize>, k: usize, name: &str) -> Result<Permutation> {
    if v.len() != k {
        return Err(Error::Format(format!("{name} has degree {}, expected {k}", v.len())));
    }
    if v.contains(&0) {
        return Err(Error::Format(format!("{name} must be 1-based")));
    }
    Permutation::from_vec(v.into_iter().map(|i| i - 1).collect())
}

impl From<&DecompositionBundle> for BundleFile {
    fn from(b: &DecompositionBundle) -> Self {
        BundleFile {
            m: b.m,
            n: b.n,
            t: b.t,
            ncol: b.ncol,
            nrow: b.nrow,
            frac_bits: b.frac_bits,
            sigma1: one_based(&b.sigma1),
            sigma2: one_based(&b.sigma2),
            sigma3: one_based(&b.sigma3),
            sigma4: one_based(&b.sigma4),
            sigma5: one_based(&b.sigma5),
            lambda: b.lambda.iter().map(|l| l.as_i64()).collect(),
        }
    }
}

impl TryFrom<BundleFile> for DecompositionBundle {
    type Error = Error;

    fn try_from(f: BundleFile) -> Result<Self> {
        if f.lambda.len() != f.t || f.ncol > f.n.min(f.t) || f.nrow > f.m.min(f.t) {
            return Err(Error::Format("inconsistent bundle dimensions".into()));
        }
        Ok(DecompositionBundle {
            m: f.m,
            n: f.n,
            t: f.t,
            sigma1: zero_based(f.sigma1, f.n, "sigma1")?,
            sigma2: zero_based(f.sigma2, f.t, "sigma2")?,
            sigma3: zero_based(f.sigma3, f.t, "sigma3")?,
            sigma4: zero_based(f.sigma4, f.t, "sigma4")?,
            sigma5: zero_based(f.sigma5, f.m, "sigma5")?,
            ncol: f.ncol,
            nrow: f.nrow,
            lambda: f.lambda.into_iter().map(Ring::from_i64).collect(),
            frac_bits: f.frac_bits,
        })
    }
}
