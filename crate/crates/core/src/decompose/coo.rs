use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::ring::{FixedPointConfig, Ring};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub weight: Ring,
}

/// Sparse matrix in coordinate form. Entries are kept sorted by `(row, col)`,
/// are unique and have non-zero weight.
///
/// `frac_bits` records how the weights are scaled: 0 means plain integers,
/// otherwise weights are fixed-point values with that many fractional bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMatrixCoo {
    m: usize,
    n: usize,
    entries: Vec<Entry>,
    frac_bits: u32,
}

impl SparseMatrixCoo {
    /// Builds a matrix from unordered triples. Explicit zeros are dropped.
    pub fn new(m: usize, n: usize, triples: Vec<(usize, usize, Ring)>, frac_bits: u32) -> Result<Self> {
        let mut entries = Vec::with_capacity(triples.len());
        for (row, col, weight) in triples {
            if row >= m || col >= n {
                return Err(Error::IndexOutOfRange(format!("entry ({row}, {col}) in a {m}x{n} matrix")));
            }
            if weight != Ring::ZERO {
                entries.push(Entry { row, col, weight });
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if let Some(w) = entries.windows(2).find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col)) {
            return Err(Error::DuplicateEntry { row: w[0].row, col: w[0].col });
        }
        Ok(SparseMatrixCoo { m, n, entries, frac_bits })
    }

    pub fn from_dense(a: &RingMatrix, frac_bits: u32) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.rows() {
            for (j, &w) in a.row(i).iter().enumerate() {
                if w != Ring::ZERO {
                    entries.push(Entry { row: i, col: j, weight: w });
                }
            }
        }
        SparseMatrixCoo { m: a.rows(), n: a.cols(), entries, frac_bits }
    }

    /// The `k x k` identity with weight `1` in the given scaling.
    pub fn identity(k: usize, frac_bits: u32) -> Self {
        let one = Ring(1u64 << frac_bits);
        SparseMatrixCoo {
            m: k,
            n: k,
            entries: (0..k).map(|i| Entry { row: i, col: i, weight: one }).collect(),
            frac_bits,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn weights(&self) -> Vec<Ring> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    /// Ring value of one in this matrix's scaling.
    pub fn unit(&self) -> Ring {
        Ring(1u64 << self.frac_bits)
    }

    pub fn nonzero_rows(&self) -> usize {
        let mut rows: Vec<usize> = self.entries.iter().map(|e| e.row).collect();
        rows.dedup();
        rows.len()
    }

    pub fn nonzero_cols(&self) -> usize {
        let mut cols: Vec<usize> = self.entries.iter().map(|e| e.col).collect();
        cols.sort_unstable();
        cols.dedup();
        cols.len()
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<Entry> =
            self.entries.iter().map(|e| Entry { row: e.col, col: e.row, weight: e.weight }).collect();
        entries.sort_by_key(|e| (e.row, e.col));
        SparseMatrixCoo { m: self.n, n: self.m, entries, frac_bits: self.frac_bits }
    }

    pub fn to_dense(&self) -> RingMatrix {
        let mut a = RingMatrix::zeros(self.m, self.n);
        for e in &self.entries {
            a.set(e.row, e.col, e.weight);
        }
        a
    }

    pub fn to_dense_f64(&self) -> crate::matrix::Matrix<f64> {
        let scale = (1u64 << self.frac_bits) as f64;
        let mut a = crate::matrix::Matrix::zeros(self.m, self.n);
        for e in &self.entries {
            a.set(e.row, e.col, e.weight.as_i64() as f64 / scale);
        }
        a
    }

    /// Q-type: exactly one entry per row, equal to one, with column index
    /// non-decreasing in the row index.
    pub fn check_q_type(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::NotStructured { kind: "Q", reason });
        if self.entries.len() != self.m {
            return bad(format!("{} entries for {} rows", self.entries.len(), self.m));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.row != i {
                return bad(format!("row {i} has no entry or more than one"));
            }
            if e.weight != self.unit() {
                return bad(format!("row {i} holds a non-unit weight"));
            }
            if i > 0 && self.entries[i - 1].col > e.col {
                return bad(format!("column index decreases at row {i}"));
            }
        }
        Ok(())
    }

    /// P-type: the transpose is Q-type.
    pub fn check_p_type(&self) -> Result<()> {
        self.transpose().check_q_type().map_err(|e| match e {
            Error::NotStructured { reason, .. } => Error::NotStructured { kind: "P", reason },
            other => other,
        })
    }

    /// Parses the text format: a header line `m n t`, then `t` lines `i j λ`
    /// with 1-based indices and decimal weights encoded at `cfg`.
    pub fn parse_text(text: &str, cfg: FixedPointConfig) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let dims = parse_usizes(header, hline)?;
        let [m, n, t] = dims[..] else {
            return Err(Error::Parse { line: hline, msg: "header must be `m n t`".into() });
        };
        let mut triples = Vec::with_capacity(t);
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse { line, msg: format!("expected `i j weight`, got {l:?}") });
            }
            let idx = parse_usizes(&parts[..2].join(" "), line)?;
            if idx[0] == 0 || idx[1] == 0 {
                return Err(Error::Parse { line, msg: "indices are 1-based".into() });
            }
            let w: f64 = parts[2]
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("bad weight {:?}", parts[2]) })?;
            triples.push((idx[0] - 1, idx[1] - 1, cfg.encode(w)?));
        }
        if triples.len() != t {
            return Err(Error::Parse { line: hline, msg: format!("header announces {t} entries, found {}", triples.len()) });
        }
        SparseMatrixCoo::new(m, n, triples, cfg.frac_bits)
    }

    pub fn to_text(&self) -> String {
        let scale = (1u64 << self.frac_bits) as f64;
        let mut s = format!("{} {} {}\n", self.m, self.n, self.nnz());
        for e in &self.entries {
            let _ = writeln!(s, "{} {} {}", e.row + 1, e.col + 1, e.weight.as_i64() as f64 / scale);
        }
        s
    }
}

fn parse_usizes(s: &str, line: usize) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|p| p.parse().map_err(|_| Error::Parse { line, msg: format!("bad integer {p:?}") }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_deduplicated() {
        let a = SparseMatrixCoo::new(2, 2, vec![(1, 0, Ring(3)), (0, 1, Ring(2)), (0, 0, Ring(0))], 0).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!((a.entries()[0].row, a.entries()[0].col), (0, 1));
        assert!(matches!(
            SparseMatrixCoo::new(2, 2, vec![(1, 0, Ring(3)), (1, 0, Ring(2))], 0),
            Err(Error::DuplicateEntry { row: 1, col: 0 })
        ));
        assert!(SparseMatrixCoo::new(2, 2, vec![(2, 0, Ring(3))], 0).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let cfg = FixedPointConfig::default();
        let text = "3 2 3\n1 1 0.5\n3 2 -2\n2 1 1.25\n";
        let a = SparseMatrixCoo::parse_text(text, cfg).unwrap();
        assert_eq!(a.to_dense().get(2, 1), cfg.encode(-2.0).unwrap());
        let b = SparseMatrixCoo::parse_text(&a.to_text(), cfg).unwrap();
        assert_eq!(a, b);
        assert!(matches!(SparseMatrixCoo::parse_text("2 2 1\n0 1 1\n", cfg), Err(Error::Parse { line: 2, .. })));
        assert!(SparseMatrixCoo::parse_text("2 2 2\n1 1 1\n", cfg).is_err());
    }

    #[test]
    fn structure_checks() {
        assert!(SparseMatrixCoo::identity(3, 0).check_q_type().is_ok());
        assert!(SparseMatrixCoo::identity(3, 0).check_p_type().is_ok());
        let q = SparseMatrixCoo::new(3, 2, vec![(0, 1, Ring(1)), (1, 0, Ring(1)), (2, 1, Ring(1))], 0).unwrap();
        assert!(matches!(q.check_q_type(), Err(Error::NotStructured { kind: "Q", .. })));
        let q = SparseMatrixCoo::new(3, 2, vec![(0, 0, Ring(1)), (2, 1, Ring(1))], 0).unwrap();
        assert!(q.check_q_type().is_err());
    }
}
