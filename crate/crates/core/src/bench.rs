//! Communication benchmarks of the core protocols on random inputs.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dealer::{Dealer, LiveSource};
use crate::decompose::{decompose_full, Permutation, SparseMatrixCoo};
use crate::error::{Error, Result};
use crate::matrix::RingMatrix;
use crate::protocols::{matmul, op_shared, osm};
use crate::ring::{share_vec, FixedPointConfig, Ring};
use crate::runtime::{estimate_time, run_two_party, CommMeter, NetworkModel};
use crate::smm::{dense_beaver_online_bits, smm, Operand, SmmShape};

/// Largest node count for which the dense baseline is run rather than
/// computed from its cost formula.
pub const DENSE_MEASURE_LIMIT: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub protocol: String,
    pub nodes: usize,
    pub edges: usize,
    pub dim: usize,
    pub trials: usize,
    pub online_bits: u64,
    pub online_bytes: u64,
    pub offline_bytes: u64,
    pub rounds: u64,
    pub est_time_by_condition: BTreeMap<String, f64>,
    /// Mean wall time of one trial, in seconds.
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
}

/// The dense Beaver product of the same shape, for comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub online_bits: u64,
    pub online_bytes: u64,
    pub measured: bool,
    /// `1 - smm / dense` in online bits.
    pub saving: f64,
}

fn report(protocol: &str, nodes: usize, edges: usize, dim: usize, trials: usize, m: &CommMeter, secs: f64) -> BenchReport {
    BenchReport {
        protocol: protocol.into(),
        nodes,
        edges,
        dim,
        trials,
        online_bits: m.online_bits,
        online_bytes: m.online_bytes,
        offline_bytes: m.offline_bytes(),
        rounds: m.rounds,
        est_time_by_condition: NetworkModel::ALL.iter().map(|n| (n.name.to_string(), estimate_time(m, n))).collect(),
        wall_time_s: secs / trials as f64,
        baseline: None,
    }
}

fn random_shares(rows: usize, cols: usize, rng: &mut StdRng) -> (RingMatrix, RingMatrix) {
    let x: Vec<Ring> = (0..rows * cols).map(|_| Ring::random(rng)).collect();
    let (a, b) = share_vec(&x, rng);
    (RingMatrix::from_vec(rows, cols, a).expect("shape"), RingMatrix::from_vec(rows, cols, b).expect("shape"))
}

/// A square 0/1 matrix with `per_node` distinct random nonzeros in every row.
pub fn random_graph(nodes: usize, per_node: usize, rng: &mut StdRng) -> Result<SparseMatrixCoo> {
    if per_node > nodes {
        return Err(Error::Config(format!("{per_node} edges per node with only {nodes} nodes")));
    }
    let mut triples = Vec::with_capacity(nodes * per_node);
    for u in 0..nodes {
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < per_node {
            seen.insert(rng.gen_range(0..nodes));
        }
        triples.extend(seen.into_iter().map(|v| (u, v, Ring::ONE)));
    }
    SparseMatrixCoo::new(nodes, nodes, triples, 0)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    Ok(())
}

/// Secure sparse-dense product of a random graph with a shared `nodes x dim` operand.
pub fn bench_smm(nodes: usize, per_node: usize, dim: usize, trials: usize, seed: u64) -> Result<BenchReport> {
    check_trials(trials)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let a = random_graph(nodes, per_node, &mut rng)?;
    let bundle = decompose_full(&a)?;
    let shape = SmmShape::from(&bundle);
    let (x0, x1) = random_shares(nodes, dim, &mut rng);
    let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
    let cfg = FixedPointConfig::default();
    let mut meter = CommMeter::default();
    let start = Instant::now();
    for _ in 0..trials {
        let (_, _, m) = run_two_party(
            cfg,
            &mut s0,
            &mut s1,
            |c| smm(c, Some(&bundle), shape, &x0, Operand::Shared),
            |c| smm(c, None, shape, &x1, Operand::Shared),
        )?;
        meter = m;
    }
    let mut r = report("smm", nodes, a.nnz(), dim, trials, &meter, start.elapsed().as_secs_f64());
    let (bits, measured) = if nodes <= DENSE_MEASURE_LIMIT {
        (dense_baseline(&a, &x0, &x1, seed)?.online_bits, true)
    } else {
        (dense_beaver_online_bits(nodes, nodes, dim), false)
    };
    r.baseline = Some(Baseline {
        online_bits: bits,
        online_bytes: bits.div_ceil(8),
        measured,
        saving: 1.0 - meter.online_bits as f64 / bits as f64,
    });
    Ok(r)
}

/// Runs the dense Beaver product with the adjacency shared by party 0.
pub fn dense_baseline(a: &SparseMatrixCoo, x0: &RingMatrix, x1: &RingMatrix, seed: u64) -> Result<CommMeter> {
    let dense = a.to_dense();
    let zero = RingMatrix::zeros(dense.rows(), dense.cols());
    let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed ^ 0xd)), 0);
    let (_, _, m) = run_two_party(
        FixedPointConfig::default(),
        &mut s0,
        &mut s1,
        |c| matmul(c, &dense, x0, false),
        |c| matmul(c, &zero, x1, false),
    )?;
    Ok(m)
}

/// Oblivious permutation of a shared `nodes x dim` matrix.
pub fn bench_op(nodes: usize, dim: usize, trials: usize, seed: u64) -> Result<BenchReport> {
    check_trials(trials)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let sigma = Permutation::random(nodes, &mut rng);
    let (x0, x1) = random_shares(nodes, dim, &mut rng);
    let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
    let cfg = FixedPointConfig::default();
    let mut meter = CommMeter::default();
    let start = Instant::now();
    for _ in 0..trials {
        let (_, _, m) =
            run_two_party(cfg, &mut s0, &mut s1, |c| op_shared(c, Some(&sigma), &x0), |c| op_shared(c, None, &x1))?;
        meter = m;
    }
    Ok(report("op", nodes, 0, dim, trials, &meter, start.elapsed().as_secs_f64()))
}

/// Oblivious selection-multiplication of `nodes` rows with party 0's random selectors.
pub fn bench_osm(nodes: usize, dim: usize, trials: usize, seed: u64) -> Result<BenchReport> {
    check_trials(trials)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let sel: Vec<bool> = (0..nodes).map(|_| rng.gen()).collect();
    let (x0, x1) = random_shares(nodes, dim, &mut rng);
    let (mut s0, mut s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
    let cfg = FixedPointConfig::default();
    let mut meter = CommMeter::default();
    let start = Instant::now();
    for _ in 0..trials {
        let (_, _, m) = run_two_party(cfg, &mut s0, &mut s1, |c| osm(c, Some(&sel), &x0), |c| osm(c, None, &x1))?;
        meter = m;
    }
    Ok(report("osm", nodes, 0, dim, trials, &meter, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_is_one_round() {
        let r = bench_op(8, 1, 2, 1).unwrap();
        assert_eq!(r.rounds, 1);
        assert_eq!(r.online_bits, 8 * 64 + 8 * 3);
    }

    #[test]
    fn osm_cost() {
        let r = bench_osm(10, 2, 1, 1).unwrap();
        assert_eq!((r.rounds, r.online_bits), (1, 10 * 2 * 65));
    }

    #[test]
    fn smm_matches_formula_and_measured_baseline() {
        let r = bench_smm(64, 2, 3, 1, 4).unwrap();
        let shape = SmmShape { m: 64, n: 64, t: 128, frac_bits: 0 };
        assert_eq!((r.online_bits, r.rounds), (shape.online_bits(3), 8));
        let b = r.baseline.unwrap();
        assert!(b.measured);
        assert_eq!(b.online_bits, dense_beaver_online_bits(64, 64, 3));
        assert!(bench_smm(4, 5, 1, 1, 1).is_err());
        assert!(bench_op(4, 1, 0, 1).is_err());
    }
}
