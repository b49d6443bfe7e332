//! Secure training and inference. Party 0 owns the graph and holds its
//! decomposition; party 1 owns the features and labels. Weights, activations
//! and gradients stay shared; the train/test masks are public.

use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dealer::{Dealer, LiveSource};
use crate::decompose::{decompose_full, DecompositionBundle};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, RingMatrix};
use crate::nonlinear::{adam_step, relu_with_mask, sgd_step, softmax_rows, AdamState};
use crate::protocols::{matmul, mul_elem_matrix, reveal_matrix, scale_public};
use crate::ring::{reconstruct_vec, share_vec, FixedPointConfig, Ring};
use crate::runtime::{run_two_party, CommMeter, PartyCtx};
use crate::smm::{placeholder, smm, smm_transpose, Operand, SmmShape};

use super::dataset::GraphDataset;
use super::{accuracy, cross_entropy, predictions, EpochRecord, Optimizer, Totals, TrainConfig, TrainReport, Weights};

/// One party's view of the model.
#[derive(Clone, Debug)]
pub struct PartyModel {
    pub w1: RingMatrix,
    pub w2: RingMatrix,
    pub adam: Option<(AdamState, AdamState)>,
}

#[derive(Clone, Debug)]
pub struct SecureModel {
    pub cfg: FixedPointConfig,
    pub parties: [PartyModel; 2],
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    frac_bits: u32,
    shape: [usize; 3],
    w1: [Vec<u64>; 2],
    w2: [Vec<u64>; 2],
}

fn raw(m: &RingMatrix) -> Vec<u64> {
    m.as_slice().iter().map(|r| r.0).collect()
}

impl SecureModel {
    /// Splits plaintext weights into fresh shares.
    pub fn share(w: &Weights, cfg: FixedPointConfig, seed: u64) -> Result<Self> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut split = |m: &Matrix<f64>| -> Result<(RingMatrix, RingMatrix)> {
            let (a, b) = share_vec(&cfg.encode_vec(m.as_slice())?, &mut rng);
            Ok((RingMatrix::from_vec(m.rows(), m.cols(), a)?, RingMatrix::from_vec(m.rows(), m.cols(), b)?))
        };
        let (a1, b1) = split(&w.w1)?;
        let (a2, b2) = split(&w.w2)?;
        Ok(SecureModel {
            cfg,
            parties: [PartyModel { w1: a1, w2: a2, adam: None }, PartyModel { w1: b1, w2: b2, adam: None }],
        })
    }

    /// Reconstructs the weights (for evaluation and tests).
    pub fn reveal(&self) -> Result<Weights> {
        let open = |a: &RingMatrix, b: &RingMatrix| {
            Matrix::from_vec(a.rows(), a.cols(), self.cfg.decode_vec(&reconstruct_vec(a.as_slice(), b.as_slice())))
        };
        let [p, q] = &self.parties;
        Ok(Weights { w1: open(&p.w1, &q.w1)?, w2: open(&p.w2, &q.w2)? })
    }

    pub fn to_json(&self) -> Result<String> {
        let [p, q] = &self.parties;
        let f = ModelFile {
            frac_bits: self.cfg.frac_bits,
            shape: [p.w1.rows(), p.w1.cols(), p.w2.cols()],
            w1: [raw(&p.w1), raw(&q.w1)],
            w2: [raw(&p.w2), raw(&q.w2)],
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        let [d, h, c] = f.shape;
        let mat = |r: usize, k: usize, v: &[u64]| RingMatrix::from_vec(r, k, v.iter().map(|&x| Ring(x)).collect());
        let party = |i: usize| -> Result<PartyModel> {
            Ok(PartyModel { w1: mat(d, h, &f.w1[i])?, w2: mat(h, c, &f.w2[i])?, adam: None })
        };
        Ok(SecureModel { cfg: FixedPointConfig::new(f.frac_bits)?, parties: [party(0)?, party(1)?] })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Everything fixed for the life of a dataset: the decomposition held by
/// party 0 and the encoded inputs held by party 1.
pub struct SecureSetup {
    pub cfg: FixedPointConfig,
    pub bundle: DecompositionBundle,
    pub shape: SmmShape,
    pub features: RingMatrix,
    pub one_hot: RingMatrix,
    pub train: Vec<bool>,
    pub classes: usize,
}

impl SecureSetup {
    pub fn new(ds: &GraphDataset, cfg: FixedPointConfig) -> Result<Self> {
        ds.validate()?;
        let bundle = decompose_full(&ds.adjacency(cfg)?)?;
        let shape = SmmShape::from(&bundle);
        let enc = |m: &Matrix<f64>| -> Result<RingMatrix> { RingMatrix::from_vec(m.rows(), m.cols(), cfg.encode_vec(m.as_slice())?) };
        Ok(SecureSetup {
            cfg,
            features: enc(&ds.features)?,
            one_hot: enc(&ds.one_hot())?,
            bundle,
            shape,
            train: ds.train.clone(),
            classes: ds.classes,
        })
    }

    fn bundle_for(&self, ctx: &PartyCtx) -> Option<&DecompositionBundle> {
        ctx.is_p0().then_some(&self.bundle)
    }

    /// Party 1's plaintext features, or the placeholder for party 0.
    fn features_for(&self, ctx: &PartyCtx) -> RingMatrix {
        if ctx.is_p0() {
            placeholder(self.features.rows(), self.features.cols())
        } else {
            self.features.clone()
        }
    }

    /// Labels shared as (0, one-hot).
    fn labels_for(&self, ctx: &PartyCtx) -> RingMatrix {
        if ctx.is_p0() {
            placeholder(self.one_hot.rows(), self.one_hot.cols())
        } else {
            self.one_hot.clone()
        }
    }
}

/// Shared activations kept for the backward pass.
pub struct Cache {
    pub ax: RingMatrix,
    pub z: RingMatrix,
    pub mask: RingMatrix,
    pub logits: RingMatrix,
}

pub fn forward(ctx: &mut PartyCtx, setup: &SecureSetup, w1: &RingMatrix, w2: &RingMatrix) -> Result<Cache> {
    ctx.scoped("forward", |ctx| {
        let x = setup.features_for(ctx);
        let ax = ctx.scoped("layer1", |c| smm(c, setup.bundle_for(c), setup.shape, &x, Operand::Plain))?;
        let h = ctx.scoped("layer1", |c| matmul(c, &ax, w1, true))?;
        let (z, mask) = relu_with_mask(ctx, h.as_slice())?;
        let z = RingMatrix::from_vec(h.rows(), h.cols(), z)?;
        let mask = RingMatrix::from_vec(h.rows(), h.cols(), mask)?;
        let az = ctx.scoped("layer2", |c| smm(c, setup.bundle_for(c), setup.shape, &z, Operand::Shared))?;
        let logits = ctx.scoped("layer2", |c| matmul(c, &az, w2, true))?;
        Ok(Cache { ax, z, mask, logits })
    })
}

/// Shares of `(∂loss/∂W1, ∂loss/∂W2)` for the masked mean cross entropy.
pub fn backward(ctx: &mut PartyCtx, setup: &SecureSetup, cache: &Cache, w2: &RingMatrix) -> Result<(RingMatrix, RingMatrix)> {
    ctx.scoped("backward", |ctx| {
        let s = softmax_rows(ctx, &cache.logits)?;
        let y = setup.labels_for(ctx);
        let ntrain = setup.train.iter().filter(|&&b| b).count();
        let (n, c) = s.shape();
        let mut g = s.sub(&y)?;
        if ntrain > 0 {
            let scaled = scale_public(ctx, g.as_slice(), ctx.cfg().constant(1.0 / ntrain as f64));
            g = RingMatrix::from_vec(n, c, scaled)?;
        }
        for (i, &keep) in setup.train.iter().enumerate() {
            if !keep || ntrain == 0 {
                g.row_mut(i).fill(Ring::ZERO);
            }
        }
        let p = smm_transpose(ctx, setup.bundle_for(ctx), setup.shape, &g)?;
        let (dw2, dz) = ctx.scoped("grad", |c| {
            let dw2 = matmul(c, &cache.z.transpose(), &p, true)?;
            let dz = matmul(c, &p, &w2.transpose(), true)?;
            Ok::<_, Error>((dw2, dz))
        })?;
        let dh = ctx.scoped("relu-grad", |c| mul_elem_matrix(c, &dz, &cache.mask, false))?;
        let dw1 = ctx.scoped("grad", |c| matmul(c, &cache.ax.transpose(), &dh, true))?;
        Ok((dw1, dw2))
    })
}

fn update(ctx: &mut PartyCtx, cfg: &TrainConfig, model: &mut PartyModel, dw1: &RingMatrix, dw2: &RingMatrix) -> Result<()> {
    ctx.scoped("update", |ctx| {
        match cfg.optimizer {
            Optimizer::Sgd => {
                model.w1 = sgd_step(ctx, &model.w1, dw1, cfg.eta)?;
                model.w2 = sgd_step(ctx, &model.w2, dw2, cfg.eta)?;
            }
            Optimizer::Adam => {
                let (s1, s2) = model.adam.get_or_insert_with(|| {
                    (
                        AdamState::new(dw1.rows(), dw1.cols(), cfg.adam()),
                        AdamState::new(dw2.rows(), dw2.cols(), cfg.adam()),
                    )
                });
                model.w1 = adam_step(ctx, s1, &model.w1, dw1)?;
                model.w2 = adam_step(ctx, s2, &model.w2, dw2)?;
            }
        }
        Ok(())
    })
}

/// One epoch for one party: forward, reveal the logits for evaluation,
/// backward and update.
fn epoch(ctx: &mut PartyCtx, setup: &SecureSetup, cfg: &TrainConfig, mut model: PartyModel) -> Result<(PartyModel, RingMatrix)> {
    let cache = forward(ctx, setup, &model.w1, &model.w2)?;
    let logits = ctx.scoped("eval", |c| reveal_matrix(c, &cache.logits))?;
    let (dw1, dw2) = backward(ctx, setup, &cache, &model.w2)?;
    update(ctx, cfg, &mut model, &dw1, &dw2)?;
    Ok((model, logits))
}

fn decode(cfg: FixedPointConfig, m: &RingMatrix) -> Result<Matrix<f64>> {
    Matrix::from_vec(m.rows(), m.cols(), cfg.decode_vec(m.as_slice()))
}

/// A pair of live dealer sources shared by consecutive runs.
pub struct Sources {
    pub s0: LiveSource,
    pub s1: LiveSource,
}

impl Sources {
    pub fn new(seed: u64) -> Self {
        let (s0, s1) = LiveSource::pair(&Arc::new(Dealer::from_seed(seed)), 0);
        Sources { s0, s1 }
    }
}

/// Revealed logits of a forward pass with the given model.
pub fn infer(setup: &SecureSetup, model: &SecureModel, src: &mut Sources) -> Result<(Matrix<f64>, CommMeter)> {
    let prog = |ctx: &mut PartyCtx| {
        let m = &model.parties[ctx.id().index()];
        let cache = forward(ctx, setup, &m.w1, &m.w2)?;
        ctx.scoped("eval", |c| reveal_matrix(c, &cache.logits))
    };
    let (l0, _, meter) = run_two_party(setup.cfg, &mut src.s0, &mut src.s1, prog, prog)?;
    Ok((decode(setup.cfg, &l0)?, meter))
}

/// Revealed gradients of the current model (for validation).
pub fn gradients(setup: &SecureSetup, model: &SecureModel, src: &mut Sources) -> Result<(Weights, CommMeter)> {
    let prog = |ctx: &mut PartyCtx| {
        let m = &model.parties[ctx.id().index()];
        let cache = forward(ctx, setup, &m.w1, &m.w2)?;
        let (dw1, dw2) = backward(ctx, setup, &cache, &m.w2)?;
        Ok((reveal_matrix(ctx, &dw1)?, reveal_matrix(ctx, &dw2)?))
    };
    let ((g1, g2), _, meter) = run_two_party(setup.cfg, &mut src.s0, &mut src.s1, prog, prog)?;
    Ok((Weights { w1: decode(setup.cfg, &g1)?, w2: decode(setup.cfg, &g2)? }, meter))
}

pub struct SecureRun {
    pub model: SecureModel,
    pub report: TrainReport,
    pub predictions: Vec<usize>,
    pub epoch_meters: Vec<CommMeter>,
    pub inference_meter: CommMeter,
}

/// Trains from the seeded initialization, one two-party run per epoch, then
/// runs a final inference pass.
pub fn train_secure(ds: &GraphDataset, cfg: &TrainConfig) -> Result<SecureRun> {
    cfg.validate()?;
    let fp = FixedPointConfig::new(cfg.frac_bits)?;
    let setup = SecureSetup::new(ds, fp)?;
    let init = Weights::init(ds.dim(), cfg.hidden, ds.classes, cfg.seed);
    let mut model = SecureModel::share(&init, fp, cfg.seed.wrapping_add(1))?;
    let mut src = Sources::new(cfg.seed.wrapping_add(2));
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    let mut epoch_meters = Vec::with_capacity(cfg.epochs);
    let mut totals = Totals::default();
    for e in 0..cfg.epochs {
        let [m0, m1] = model.parties.clone();
        let ((m0, logits), (m1, _), meter) = run_two_party(
            fp,
            &mut src.s0,
            &mut src.s1,
            |ctx| epoch(ctx, &setup, cfg, m0),
            |ctx| epoch(ctx, &setup, cfg, m1),
        )?;
        model.parties = [m0, m1];
        let logits = decode(fp, &logits)?;
        let pred = predictions(&logits);
        per_epoch.push(EpochRecord {
            epoch: e,
            loss: cross_entropy(&logits, &ds.labels, &ds.train),
            acc: accuracy(&pred, &ds.labels, &ds.test),
            train_acc: accuracy(&pred, &ds.labels, &ds.train),
            online_bits: meter.online_bits,
            online_bytes: meter.online_bytes,
            rounds: meter.rounds,
        });
        totals.add(&meter);
        epoch_meters.push(meter);
    }
    let (logits, inference_meter) = infer(&setup, &model, &mut src)?;
    let pred = predictions(&logits);
    let report = TrainReport {
        dataset: ds.name.clone(),
        config: cfg.clone(),
        per_epoch,
        est_time: totals.est_time(),
        totals,
        test_accuracy: accuracy(&pred, &ds.labels, &ds.test),
    };
    Ok(SecureRun { model, report, predictions: pred, epoch_meters, inference_meter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::clear;
    use crate::gcn::dataset::normalized_dense;

    #[test]
    fn zero_weights_give_zero_logits() {
        let ds = GraphDataset::synthetic(8, 3, 1);
        let setup = SecureSetup::new(&ds, FixedPointConfig::default()).unwrap();
        let w = Weights::init(3, 4, 2, 1).zeros_like();
        let model = SecureModel::share(&w, setup.cfg, 9).unwrap();
        let (logits, _) = infer(&setup, &model, &mut Sources::new(3)).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_clear() {
        let ds = GraphDataset::synthetic(12, 4, 2);
        let setup = SecureSetup::new(&ds, FixedPointConfig::default()).unwrap();
        let w = Weights::init(4, 6, 2, 3);
        let model = SecureModel::share(&w, setup.cfg, 4).unwrap();
        let (logits, meter) = infer(&setup, &model, &mut Sources::new(5)).unwrap();
        let a = normalized_dense(&ds.edges, ds.nodes).unwrap();
        let want = clear::forward(&a, &ds.features, &w).unwrap().logits;
        assert!(logits.max_abs_diff(&want) <= 10.0 * 2f64.powi(-16), "{}", logits.max_abs_diff(&want));
        assert!(meter.online_bits > 0);
    }

    #[test]
    fn single_node_is_an_mlp() {
        let mut ds = GraphDataset::synthetic(2, 3, 4);
        ds.nodes = 1;
        ds.edges.clear();
        ds.features = Matrix::from_rows(&[ds.features.row(0).to_vec()]).unwrap();
        ds.labels.truncate(1);
        ds.train = vec![true];
        ds.test = vec![true];
        let setup = SecureSetup::new(&ds, FixedPointConfig::default()).unwrap();
        let w = Weights::init(3, 5, 2, 6);
        let model = SecureModel::share(&w, setup.cfg, 7).unwrap();
        let (logits, _) = infer(&setup, &model, &mut Sources::new(8)).unwrap();
        let h = ds.features.matmul(&w.w1).unwrap().map(|v| v.max(0.0));
        assert!(logits.max_abs_diff(&h.matmul(&w.w2).unwrap()) <= 2f64.powi(-10));
        let (g, _) = gradients(&setup, &model, &mut Sources::new(9)).unwrap();
        let want = clear::gradients(&Matrix::from_rows(&[vec![1.0]]).unwrap(), &ds, &w).unwrap();
        assert!(g.w1.max_abs_diff(&want.w1) <= 0.01 && g.w2.max_abs_diff(&want.w2) <= 0.01);
    }

    #[test]
    fn model_json_round_trip() {
        let w = Weights::init(3, 4, 2, 1);
        let m = SecureModel::share(&w, FixedPointConfig::default(), 2).unwrap();
        let back = SecureModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.reveal().unwrap(), m.reveal().unwrap());
        assert!(m.reveal().unwrap().w1.max_abs_diff(&w.w1) <= 2f64.powi(-17));
    }

    #[test]
    fn epochs_cost_the_same_and_no_training_keeps_weights() {
        let mut ds = GraphDataset::synthetic(8, 2, 3);
        ds.train = vec![false; 8];
        let cfg = TrainConfig::new(Optimizer::Sgd, 2, 4);
        let run = train_secure(&ds, &cfg).unwrap();
        let init = Weights::init(2, cfg.hidden, 2, 4);
        let got = run.model.reveal().unwrap();
        let fresh = SecureModel::share(&init, run.model.cfg, 0).unwrap().reveal().unwrap();
        assert_eq!(got, fresh);
        let [a, b] = [&run.epoch_meters[0], &run.epoch_meters[1]];
        assert_eq!((a.online_bits, a.rounds, a.offline_bits), (b.online_bits, b.rounds, b.offline_bits));
    }
}
