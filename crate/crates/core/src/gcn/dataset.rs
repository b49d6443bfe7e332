//! Graph datasets on disk and the normalized adjacency.
//!
//! A dataset directory holds `edges.tsv` (`u<TAB>v`, 0-based, undirected),
//! `features.csv` (one row per node), `labels.csv` (one class index per line)
//! and `masks.csv` (header `train,test`, then `0`/`1` per node).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::decompose::SparseMatrixCoo;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::ring::FixedPointConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Matrix<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub train: Vec<bool>,
    pub test: Vec<bool>,
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, msg: e.to_string() }
}

fn reader(text: &str, delim: u8, headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
    let s = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing field {}", i + 1) })?;
    s.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse {s:?}") })
}

fn records(text: &str, delim: u8, headers: bool) -> Result<Vec<csv::StringRecord>> {
    reader(text, delim, headers).records().map(|r| r.map_err(csv_error)).collect()
}

impl GraphDataset {
    /// Checks shapes and indices.
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::EmptyMatrix);
        }
        if self.features.rows() != self.nodes
            || self.labels.len() != self.nodes
            || self.train.len() != self.nodes
            || self.test.len() != self.nodes
        {
            return Err(Error::Shape(format!("dataset files disagree on the node count {}", self.nodes)));
        }
        if self.features.cols() == 0 {
            return Err(Error::Shape("features have no columns".into()));
        }
        if let Some(&(u, v)) = self.edges.iter().find(|&&(u, v)| u >= self.nodes || v >= self.nodes) {
            return Err(Error::IndexOutOfRange(format!("edge ({u}, {v}) with {} nodes", self.nodes)));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::IndexOutOfRange(format!("label {l} with {} classes", self.classes)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn train_count(&self) -> usize {
        self.train.iter().filter(|&&b| b).count()
    }

    pub fn one_hot(&self) -> Matrix<f64> {
        Matrix::from_fn(self.nodes, self.classes, |i, c| (self.labels[i] == c) as u8 as f64)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |f: &str| fs::read_to_string(dir.join(f));
        let features: Vec<Vec<f64>> = records(&read("features.csv")?, b',', false)?
            .iter()
            .map(|r| (0..r.len()).map(|i| field(r, i)).collect())
            .collect::<Result<_>>()?;
        let nodes = features.len();
        if nodes == 0 {
            return Err(Error::EmptyMatrix);
        }
        let features = Matrix::from_rows(&features)?;
        let edges = records(&read("edges.tsv")?, b'\t', false)?
            .iter()
            .map(|r| Ok((field(r, 0)?, field(r, 1)?)))
            .collect::<Result<Vec<_>>>()?;
        let labels = records(&read("labels.csv")?, b',', false)?.iter().map(|r| field(r, 0)).collect::<Result<Vec<usize>>>()?;
        let mut train = Vec::with_capacity(nodes);
        let mut test = Vec::with_capacity(nodes);
        for r in records(&read("masks.csv")?, b',', true)? {
            train.push(field::<u8>(&r, 0)? != 0);
            test.push(field::<u8>(&r, 1)? != 0);
        }
        let classes = labels.iter().max().map_or(0, |&l| l + 1);
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ds = GraphDataset { name, nodes, edges, features, labels, classes, train, test };
        ds.validate()?;
        Ok(ds)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let edges: String = self.edges.iter().map(|(u, v)| format!("{u}\t{v}\n")).collect();
        fs::write(dir.join("edges.tsv"), edges)?;
        let feats: String = (0..self.nodes)
            .map(|i| self.features.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        fs::write(dir.join("features.csv"), feats)?;
        let labels: String = self.labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(dir.join("labels.csv"), labels)?;
        let masks: String = std::iter::once("train,test\n".to_string())
            .chain((0..self.nodes).map(|i| format!("{},{}\n", self.train[i] as u8, self.test[i] as u8)))
            .collect();
        fs::write(dir.join("masks.csv"), masks)?;
        Ok(())
    }

    /// Two communities of equal size with dense intra-community links, a few
    /// cross links and class-dependent noisy features. Half the nodes of each
    /// community train, the rest test.
    pub fn synthetic(nodes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..nodes).map(|i| (i >= nodes / 2) as usize).collect();
        let members = |c: usize| -> Vec<usize> { (0..nodes).filter(|&i| labels[i] == c).collect() };
        let groups = [members(0), members(1)];
        let mut edges = BTreeSet::new();
        for u in 0..nodes {
            let own = &groups[labels[u]];
            for _ in 0..3 {
                let v = own[rng.gen_range(0..own.len())];
                if u != v {
                    edges.insert((u.min(v), u.max(v)));
                }
            }
            if rng.gen_bool(0.1) {
                let other = &groups[1 - labels[u]];
                if !other.is_empty() {
                    let v = other[rng.gen_range(0..other.len())];
                    edges.insert((u.min(v), u.max(v)));
                }
            }
        }
        let features = Matrix::from_fn(nodes, dim, |i, j| {
            let signal = if (j < dim / 2) == (labels[i] == 0) { 0.5 } else { 0.0 };
            signal + rng.gen_range(-1.0..1.0)
        });
        let train: Vec<bool> = (0..nodes).map(|i| i % 4 < 2).collect();
        let test = train.iter().map(|&b| !b).collect();
        GraphDataset { name: "synthetic".into(), nodes, edges: edges.into_iter().collect(), features, labels, classes: 2, train, test }
    }

    pub fn adjacency(&self, cfg: FixedPointConfig) -> Result<SparseMatrixCoo> {
        normalize_adjacency(&self.edges, self.nodes, cfg)
    }
}

/// Undirected neighbor sets with self-loops.
fn neighborhoods(edges: &[(usize, usize)], n: usize) -> Result<Vec<BTreeSet<usize>>> {
    let mut nb: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange(format!("edge ({u}, {v}) with {n} nodes")));
        }
        nb[u].insert(v);
        nb[v].insert(u);
    }
    Ok(nb)
}

/// `D^(-1/2)(A + I)D^(-1/2)` in floats.
pub fn normalized_dense(edges: &[(usize, usize)], n: usize) -> Result<Matrix<f64>> {
    let nb = neighborhoods(edges, n)?;
    let deg: Vec<f64> = nb.iter().map(|s| s.len() as f64).collect();
    let mut a = Matrix::zeros(n, n);
    for (i, s) in nb.iter().enumerate() {
        for &j in s {
            a.set(i, j, 1.0 / (deg[i] * deg[j]).sqrt());
        }
    }
    Ok(a)
}

/// The normalized adjacency with fixed-point weights.
pub fn normalize_adjacency(edges: &[(usize, usize)], n: usize, cfg: FixedPointConfig) -> Result<SparseMatrixCoo> {
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let a = normalized_dense(edges, n)?;
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = a.get(i, j);
            if w != 0.0 {
                triples.push((i, j, cfg.encode(w)?));
            }
        }
    }
    SparseMatrixCoo::new(n, n, triples, cfg.frac_bits)
}
