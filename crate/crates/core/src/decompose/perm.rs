use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A permutation in one-line notation: output position `i` receives input
/// position `map[i]`. As a matrix, row `i` has its single 1 in column `map[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation { map: (0..k).collect() }
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let k = map.len();
        let mut seen = vec![false; k];
        for &p in &map {
            if p >= k {
                return Err(Error::Permutation(format!("image {p} out of range for degree {k}")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::Permutation(format!("image {p} appears twice")));
            }
        }
        Ok(Permutation { map })
    }

    /// Uniform over S_k (Fisher-Yates driven by `rng`).
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..k).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &p) in self.map.iter().enumerate() {
            inv[p] = i;
        }
        Permutation { map: inv }
    }

    /// `self ∘ inner`: acting on a vector, `inner` is applied first.
    pub fn compose(&self, inner: &Permutation) -> Result<Self> {
        if self.degree() != inner.degree() {
            return Err(Error::Shape(format!(
                "cannot compose permutations of degree {} and {}",
                self.degree(),
                inner.degree()
            )));
        }
        Ok(Permutation { map: self.map.iter().map(|&p| inner.map[p]).collect() })
    }

    pub fn apply<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.degree() {
            return Err(Error::Shape(format!(
                "permutation of degree {} applied to length {}",
                self.degree(),
                v.len()
            )));
        }
        Ok(self.map.iter().map(|&p| v[p]).collect())
    }

    /// Permutes the rows of `m`.
    pub fn apply_rows<T: Copy + Default>(&self, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.degree() {
            return Err(Error::Shape(format!(
                "permutation of degree {} applied to {} rows",
                self.degree(),
                m.rows()
            )));
        }
        let mut data = Vec::with_capacity(m.len());
        for &p in &self.map {
            data.extend_from_slice(m.row(p));
        }
        Matrix::from_vec(m.rows(), m.cols(), data)
    }

    /// Number of bits needed to write one index: `ceil(log2 k)`.
    pub fn index_bits(k: usize) -> u32 {
        if k <= 1 {
            0
        } else {
            usize::BITS - (k - 1).leading_zeros()
        }
    }
}

/// Extends a partial injective map, given as `(target, source)` pairs, to a
/// permutation of degree `k`. Unassigned targets receive the unused sources in
/// increasing order.
pub fn pad_perm(partial: &[(usize, usize)], k: usize) -> Result<Permutation> {
    if partial.len() > k {
        return Err(Error::Permutation(format!("{} pairs exceed degree {k}", partial.len())));
    }
    let mut map = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for &(target, source) in partial {
        if target >= k || source >= k {
            return Err(Error::Permutation(format!("pair ({target}, {source}) out of range for degree {k}")));
        }
        if map[target] != usize::MAX {
            return Err(Error::Permutation(format!("target {target} assigned twice")));
        }
        if std::mem::replace(&mut used[source], true) {
            return Err(Error::Permutation(format!("source {source} used twice")));
        }
        map[target] = source;
    }
    let mut free = used.iter().enumerate().filter(|(_, &u)| !u).map(|(s, _)| s);
    for slot in map.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = free.next().expect("free sources match free targets");
    }
    Ok(Permutation { map })
}
