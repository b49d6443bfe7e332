use vsmm::gcn::clear::{self, loss};
use vsmm::gcn::secure::{gradients, Sources};
use vsmm::gcn::{normalized_dense, train_clear, train_secure, GraphDataset, Optimizer, SecureModel, SecureSetup, TrainConfig, Weights};
use vsmm::ring::FixedPointConfig;

fn parity(opt: Optimizer) {
    let ds = GraphDataset::synthetic(32, 8, 11);
    let cfg = TrainConfig::new(opt, 50, 11);
    let clear = train_clear(&ds, &cfg).unwrap();
    let secure = train_secure(&ds, &cfg).unwrap();
    let agree = clear.predictions.iter().zip(&secure.predictions).filter(|(a, b)| a == b).count();
    println!(
        "{opt:?}: clear test {:.3}, secure test {:.3}, agreement {agree}/{}",
        clear.test_accuracy, secure.report.test_accuracy, ds.nodes
    );
    assert!((clear.test_accuracy - secure.report.test_accuracy).abs() <= 0.05);
    assert!(agree as f64 >= 0.9 * ds.nodes as f64);
    let first = &secure.epoch_meters[0];
    assert!(secure.epoch_meters.iter().all(|m| m.online_bits == first.online_bits && m.rounds == first.rounds));
}

#[test]
fn sgd_parity_with_clear_trainer() {
    parity(Optimizer::Sgd);
}

#[test]
fn adam_parity_with_clear_trainer() {
    parity(Optimizer::Adam);
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn secure_gradients_follow_finite_differences() {
    let ds = GraphDataset::synthetic(12, 4, 5);
    let w = Weights::init(4, 8, 2, 6);
    let a = normalized_dense(&ds.edges, ds.nodes).unwrap();
    let h = 1e-5;
    let mut fd = Vec::new();
    for which in 0..2 {
        let len = if which == 0 { w.w1.len() } else { w.w2.len() };
        for i in 0..len {
            let at = |d: f64| {
                let mut v = w.clone();
                let m = if which == 0 { &mut v.w1 } else { &mut v.w2 };
                m.as_mut_slice()[i] += d;
                loss(&a, &ds, &v).unwrap()
            };
            fd.push((at(h) - at(-h)) / (2.0 * h));
        }
    }
    let setup = SecureSetup::new(&ds, FixedPointConfig::default()).unwrap();
    let model = SecureModel::share(&w, setup.cfg, 1).unwrap();
    let (g, _) = gradients(&setup, &model, &mut Sources::new(2)).unwrap();
    let c = cosine(&g.flatten(), &fd);
    assert!(c >= 0.99, "cosine {c}");
    let analytic = clear::gradients(&a, &ds, &w).unwrap().flatten();
    assert!(cosine(&analytic, &fd) > 0.999_999);
}
