//! Float reference trainer with the same initialization, loss and update rules
//! as the secure trainer.

use crate::error::Result;
use crate::matrix::Matrix;
use crate::nonlinear::{clear_sgd, ClearAdam};

use super::dataset::{normalized_dense, GraphDataset};
use super::{accuracy, cross_entropy, predictions, softmax, EpochRecord, Optimizer, TrainConfig, Weights};

/// Activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub ax: Matrix<f64>,
    pub h: Matrix<f64>,
    pub z: Matrix<f64>,
    pub logits: Matrix<f64>,
}

pub fn forward(a: &Matrix<f64>, x: &Matrix<f64>, w: &Weights) -> Result<Forward> {
    let ax = a.matmul(x)?;
    let h = ax.matmul(&w.w1)?;
    let z = h.map(|v| v.max(0.0));
    let logits = a.matmul(&z)?.matmul(&w.w2)?;
    Ok(Forward { ax, h, z, logits })
}

/// Gradient of the masked mean cross entropy.
pub fn gradients(a: &Matrix<f64>, ds: &GraphDataset, w: &Weights) -> Result<Weights> {
    let f = forward(a, &ds.features, w)?;
    let n = ds.train_count().max(1) as f64;
    let p = softmax(&f.logits);
    let onehot = ds.one_hot();
    let g = Matrix::from_fn(ds.nodes, ds.classes, |i, c| {
        if ds.train[i] {
            (p.get(i, c) - onehot.get(i, c)) / n
        } else {
            0.0
        }
    });
    let pg = a.transpose().matmul(&g)?;
    let dw2 = f.z.transpose().matmul(&pg)?;
    let dz = pg.matmul(&w.w2.transpose())?;
    let dh = dz.zip_map(&f.h, |d, h| if h >= 0.0 { d } else { 0.0 })?;
    let dw1 = f.ax.transpose().matmul(&dh)?;
    Ok(Weights { w1: dw1, w2: dw2 })
}

pub fn loss(a: &Matrix<f64>, ds: &GraphDataset, w: &Weights) -> Result<f64> {
    Ok(cross_entropy(&forward(a, &ds.features, w)?.logits, &ds.labels, &ds.train))
}

#[derive(Clone, Debug)]
pub struct ClearRun {
    pub weights: Weights,
    pub per_epoch: Vec<EpochRecord>,
    pub predictions: Vec<usize>,
    pub test_accuracy: f64,
    pub train_accuracy: f64,
}

pub fn train_clear(ds: &GraphDataset, cfg: &TrainConfig) -> Result<ClearRun> {
    cfg.validate()?;
    ds.validate()?;
    let a = normalized_dense(&ds.edges, ds.nodes)?;
    let mut w = Weights::init(ds.dim(), cfg.hidden, ds.classes, cfg.seed);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some((
            ClearAdam::new(w.w1.rows(), w.w1.cols(), cfg.adam()),
            ClearAdam::new(w.w2.rows(), w.w2.cols(), cfg.adam()),
        )),
        Optimizer::Sgd => None,
    };
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let logits = forward(&a, &ds.features, &w)?.logits;
        let pred = predictions(&logits);
        per_epoch.push(EpochRecord {
            epoch,
            loss: cross_entropy(&logits, &ds.labels, &ds.train),
            acc: accuracy(&pred, &ds.labels, &ds.test),
            train_acc: accuracy(&pred, &ds.labels, &ds.train),
            online_bits: 0,
            online_bytes: 0,
            rounds: 0,
        });
        let g = gradients(&a, ds, &w)?;
        match adam.as_mut() {
            Some((s1, s2)) => {
                s1.step(&mut w.w1, &g.w1);
                s2.step(&mut w.w2, &g.w2);
            }
            None => {
                clear_sgd(&mut w.w1, &g.w1, cfg.eta);
                clear_sgd(&mut w.w2, &g.w2, cfg.eta);
            }
        }
    }
    let pred = predictions(&forward(&a, &ds.features, &w)?.logits);
    Ok(ClearRun {
        test_accuracy: accuracy(&pred, &ds.labels, &ds.test),
        train_accuracy: accuracy(&pred, &ds.labels, &ds.train),
        predictions: pred,
        weights: w,
        per_epoch,
    })
}
