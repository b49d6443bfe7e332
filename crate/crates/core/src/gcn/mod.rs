//! Two-layer GCN: `softmax(Ā·relu(Ā·X·W1)·W2)` trained with softmax cross
//! entropy on the training mask, in the clear and on shares.

pub mod clear;
pub mod dataset;
pub mod secure;

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nonlinear::AdamParams;
use crate::runtime::{CommMeter, NetworkModel};

pub use clear::{train_clear, ClearRun};
pub use dataset::{normalize_adjacency, normalized_dense, GraphDataset};
pub use secure::{train_secure, SecureModel, SecureRun, SecureSetup};

pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn default_eta(self) -> f64 {
        match self {
            Optimizer::Sgd => 0.5,
            Optimizer::Adam => 0.01,
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub frac_bits: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl TrainConfig {
    pub fn new(optimizer: Optimizer, epochs: usize, seed: u64) -> Self {
        let a = AdamParams::default();
        TrainConfig {
            optimizer,
            eta: optimizer.default_eta(),
            epochs,
            seed,
            hidden: DEFAULT_HIDDEN,
            frac_bits: 16,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("at least one epoch is required".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams { eta: self.eta, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub w1: Matrix<f64>,
    pub w2: Matrix<f64>,
}

impl Weights {
    /// Glorot-uniform initialization from the seed.
    pub fn init(dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut glorot = |r: usize, c: usize| {
            let lim = (6.0 / (r + c) as f64).sqrt();
            Matrix::from_fn(r, c, |_, _| rng.gen_range(-lim..lim))
        };
        let w1 = glorot(dim, hidden);
        let w2 = glorot(hidden, classes);
        Weights { w1, w2 }
    }

    pub fn zeros_like(&self) -> Self {
        Weights { w1: Matrix::zeros(self.w1.rows(), self.w1.cols()), w2: Matrix::zeros(self.w2.rows(), self.w2.cols()) }
    }

    /// Both matrices flattened, `W1` first.
    pub fn flatten(&self) -> Vec<f64> {
        self.w1.as_slice().iter().chain(self.w2.as_slice()).copied().collect()
    }
}

pub fn predictions(logits: &Matrix<f64>) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect()
}

/// Fraction of masked nodes whose prediction matches the label; 0 for an empty mask.
pub fn accuracy(pred: &[usize], labels: &[usize], mask: &[bool]) -> f64 {
    let total = mask.iter().filter(|&&b| b).count();
    if total == 0 {
        return 0.0;
    }
    let hit = (0..pred.len()).filter(|&i| mask[i] && pred[i] == labels[i]).count();
    hit as f64 / total as f64
}

pub fn softmax(logits: &Matrix<f64>) -> Matrix<f64> {
    let (n, c) = logits.shape();
    let mut out = Matrix::zeros(n, c);
    for i in 0..n {
        let row = logits.row(i);
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - mx).exp()).sum();
        for j in 0..c {
            out.set(i, j, (row[j] - mx).exp() / s);
        }
    }
    out
}

/// Mean cross entropy over the masked nodes.
pub fn cross_entropy(logits: &Matrix<f64>, labels: &[usize], mask: &[bool]) -> f64 {
    let p = softmax(logits);
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().map(|&i| -p.get(i, labels[i]).max(1e-12).ln()).sum::<f64>() / idx.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Test accuracy of the predictions made during this epoch's forward pass.
    pub acc: f64,
    pub train_acc: f64,
    pub online_bits: u64,
    pub online_bytes: u64,
    pub rounds: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub online_bits: u64,
    pub online_bytes: u64,
    pub offline_bytes: u64,
    pub rounds: u64,
    pub messages: u64,
}

impl Totals {
    pub fn add(&mut self, m: &CommMeter) {
        self.online_bits += m.online_bits;
        self.online_bytes += m.online_bytes;
        self.offline_bytes += m.offline_bytes();
        self.rounds += m.rounds;
        self.messages += m.messages;
    }

    pub fn est_time(&self) -> BTreeMap<String, f64> {
        NetworkModel::ALL.iter().map(|n| (n.name.to_string(), n.estimate(self.rounds, self.online_bits))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset: String,
    pub config: TrainConfig,
    pub per_epoch: Vec<EpochRecord>,
    pub totals: Totals,
    pub est_time: BTreeMap<String, f64>,
    /// Test accuracy of the trained model, from a final inference pass.
    pub test_accuracy: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics() {
        let logits = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(predictions(&logits), vec![0, 1, 0]);
        assert_eq!(accuracy(&[0, 1, 0], &[0, 0, 0], &[true, true, false]), 0.5);
        assert_eq!(accuracy(&[0], &[0], &[false]), 0.0);
        let ce = cross_entropy(&logits, &[0, 1, 1], &[true, false, true]);
        let want = (-(2f64.exp() / (2f64.exp() + 1f64.exp())).ln() + 2f64.ln()) / 2.0;
        assert!((ce - want).abs() < 1e-12);
    }

    #[test]
    fn config_checks() {
        let mut c = TrainConfig::new(Optimizer::Sgd, 3, 1);
        assert!(c.validate().is_ok());
        c.eta = 0.0;
        assert!(c.validate().is_err());
        assert_eq!("adam".parse::<Optimizer>().unwrap(), Optimizer::Adam);
        assert!("rmsprop".parse::<Optimizer>().is_err());
    }
}
