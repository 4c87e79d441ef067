mod common;

use std::path::Path;

use grbm_amp::data::{load_idx, stream_rng, SignalSet, Stream};
use grbm_amp::special::sigmoid;
use grbm_amp::tap::{self, TapOptions};
use grbm_amp::training::{gibbs_step, train, TrainConfig};
use grbm_amp::{model_io, Error, Grbm, Prior};
use ndarray::{array, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn decoupled_hidden_units_follow_their_bias() {
    let bias = [0.7, -1.2];
    let model = Grbm::new(
        Array2::zeros((3, 2)),
        vec![Prior::truncated(0.4, 0.5, 0.1, 0.0, 1.0).unwrap(); 3],
        bias.iter().map(|&b| Prior::bernoulli(b).unwrap()).collect(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let steps = 100_000;
    let mut x = Array1::zeros(3);
    let mut sum = [0.0; 2];
    for _ in 0..steps {
        let (h, next) = gibbs_step(&model, x.view(), &mut rng).unwrap();
        sum[0] += h[0];
        sum[1] += h[1];
        x = next;
    }
    for (mu, &b) in bias.iter().enumerate() {
        let p = sigmoid(b);
        let se = (p * (1.0 - p) / steps as f64).sqrt();
        assert!((sum[mu] / steps as f64 - p).abs() < 3.0 * se, "unit {mu}");
    }
}

#[test]
fn saturated_hidden_unit_is_deterministic() {
    let model = Grbm::new(
        array![[0.3, -0.2]],
        vec![Prior::truncated(0.5, 0.5, 0.1, 0.0, 1.0).unwrap()],
        vec![Prior::bernoulli(60.0).unwrap(), Prior::bernoulli(-60.0).unwrap()],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = array![0.5];
    for _ in 0..1000 {
        let (h, next) = gibbs_step(&model, x.view(), &mut rng).unwrap();
        assert_eq!(h, array![1.0, 0.0]);
        x = next;
    }
}

/// Exact joint of a model with Bernoulli units on both layers, indexed by
/// `x0 + 2 x1 + 4 h0 + 8 h1`.
fn binary_joint(w: &Array2<f64>, vb: &[f64], hb: &[f64]) -> [f64; 16] {
    let mut p = [0.0; 16];
    for (s, slot) in p.iter_mut().enumerate() {
        let x = [(s & 1) as f64, ((s >> 1) & 1) as f64];
        let h = [((s >> 2) & 1) as f64, ((s >> 3) & 1) as f64];
        let mut e = vb[0] * x[0] + vb[1] * x[1] + hb[0] * h[0] + hb[1] * h[1];
        for i in 0..2 {
            for mu in 0..2 {
                e += x[i] * w[[i, mu]] * h[mu];
            }
        }
        *slot = e.exp();
    }
    let z: f64 = p.iter().sum();
    p.map(|v| v / z)
}

#[test]
fn gibbs_chain_matches_enumerated_joint() {
    let w = array![[1.1, -0.6], [0.4, 0.9]];
    let (vb, hb) = ([-0.3, 0.2], [0.5, -0.8]);
    let model = Grbm::new(
        w.clone(),
        vb.iter().map(|&b| Prior::bernoulli(b).unwrap()).collect(),
        hb.iter().map(|&b| Prior::bernoulli(b).unwrap()).collect(),
    )
    .unwrap();
    let exact = binary_joint(&w, &vb, &hb);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sweeps = 1_000_000;
    let mut counts = [0usize; 16];
    let mut x = array![0.0, 0.0];
    for _ in 0..sweeps {
        let (h, next) = gibbs_step(&model, x.view(), &mut rng).unwrap();
        // (x, h) is a draw from the joint once the chain has mixed
        let s = x[0] as usize + 2 * x[1] as usize + 4 * h[0] as usize + 8 * h[1] as usize;
        counts[s] += 1;
        x = next;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&exact)
            .map(|(&c, &p)| (c as f64 / sweeps as f64 - p).abs())
            .sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");
}

fn planted_samples(model: &Grbm, count: usize, seed: u64) -> SignalSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array1::zeros(model.n_visible());
    for _ in 0..500 {
        x = gibbs_step(model, x.view(), &mut rng).unwrap().1;
    }
    let mut rows = Array2::zeros((count, model.n_visible()));
    for mut row in rows.rows_mut() {
        for _ in 0..5 {
            x = gibbs_step(model, x.view(), &mut rng).unwrap().1;
        }
        row.assign(&x);
    }
    SignalSet::new(rows, "planted").unwrap()
}

#[test]
fn trained_model_recovers_planted_marginals() {
    let planted = common::random_grbm(16, 4, 0.8, &mut ChaCha8Rng::seed_from_u64(21));
    let data = planted_samples(&planted, 5000, 22);
    let cfg = TrainConfig {
        hidden: 4,
        epochs: 20,
        learning_rate: 0.02,
        ..TrainConfig::default()
    };
    let (model, log) = train(&data, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 20);
    let exact = common::exact_marginals(&planted, &[0.0; 16], &[0.0; 16]);
    let tap = tap::marginals(&model, &TapOptions::default()).unwrap();
    let mae = tap
        .state
        .visible_mean
        .iter()
        .zip(&exact.visible_mean)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / 16.0;
    assert!(mae < 0.05, "visible marginal MAE {mae}");
}

#[test]
fn same_seed_gives_identical_model_files() {
    let planted = common::random_grbm(12, 3, 0.5, &mut ChaCha8Rng::seed_from_u64(3));
    let data = planted_samples(&planted, 400, 4);
    let cfg = TrainConfig {
        hidden: 5,
        epochs: 3,
        seed: 17,
        ..TrainConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a.grbm", "b.grbm"] {
        let p = dir.path().join(name);
        model_io::save(&train(&data, &cfg).unwrap().0, &p).unwrap();
        files.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let other = train(&data, &TrainConfig { seed: 18, ..cfg }).unwrap().0;
    assert_ne!(model_io::load(&dir.path().join("a.grbm")).unwrap(), other);
}

#[test]
fn all_zero_data_leaves_couplings_near_zero() {
    let data = SignalSet::new(Array2::zeros((200, 10)), "zeros").unwrap();
    let cfg = TrainConfig {
        hidden: 4,
        epochs: 5,
        ..TrainConfig::default()
    };
    let (model, log) = train(&data, &cfg).unwrap();
    let start = cfg.init_scale * (40f64).sqrt();
    assert!(log.epochs.iter().all(|e| e.weight_norm < 3.0 * start));
    assert!(log.epochs.iter().all(|e| e.reconstruction_error == 0.0));
    for p in model.visible_priors() {
        match p {
            Prior::TruncGaussBernoulli(t) => assert_eq!(t.rho(), 0.0),
            other => panic!("unexpected visible prior {other:?}"),
        }
    }
}

#[test]
fn bad_training_data_is_rejected() {
    let cfg = TrainConfig {
        hidden: 2,
        batch_size: 10,
        ..TrainConfig::default()
    };
    let few = SignalSet::new(Array2::from_elem((5, 3), 0.5), "few").unwrap();
    assert!(matches!(train(&few, &cfg), Err(Error::InvalidParameter { .. })));
    let out = SignalSet::new(Array2::from_elem((20, 3), 1.5), "out").unwrap();
    assert!(matches!(train(&out, &cfg), Err(Error::InvalidParameter { .. })));
}

#[test]
fn mnist_reconstruction_error_settles_after_warmup() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset/train-images-idx3-ubyte.gz");
    let data = load_idx(&path).unwrap().head(5000);
    let (_, log) = grbm_amp::training::train_with_rng(
        &data,
        &TrainConfig::default(),
        &mut stream_rng(0, Stream::Training),
    )
    .unwrap();
    let errs: Vec<f64> = log.epochs.iter().map(|e| e.reconstruction_error).collect();
    for pair in errs[2..].windows(2) {
        assert!(pair[1] <= pair[0] * 1.05, "reconstruction error rose: {errs:?}");
    }
}
