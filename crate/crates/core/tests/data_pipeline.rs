use std::path::{Path, PathBuf};

use grbm_amp::data::*;
use grbm_amp::Error;
use ndarray::Array1;
use proptest::prelude::*;

fn mnist(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset").join(file)
}

fn write_raw(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p
}

fn header(dims: &[u32]) -> Vec<u8> {
    let mut h = (0x0800u32 | dims.len() as u32).to_be_bytes().to_vec();
    for d in dims {
        h.extend(d.to_be_bytes());
    }
    h
}

#[test]
fn two_image_header_parses() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = header(&[2, 28, 28]);
    let mut payload = vec![0u8; 1568];
    payload[0] = 255;
    payload[900] = 17;
    bytes.extend(&payload);
    let set = load_idx(&write_raw(dir.path(), "two.idx", &bytes)).unwrap();
    assert_eq!((set.len(), set.dim()), (2, 784));
    assert_eq!(set.sample(0)[0], 1.0);
    assert_eq!(set.sample(1)[900 - 784], 17.0 / 255.0);
    assert_eq!(set.sparsity(), &[1, 1]);
}

#[test]
fn malformed_idx_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = header(&[2, 28, 28]);
    bad[2] = 0x0d;
    bad.extend(vec![0u8; 1568]);
    let p = write_raw(dir.path(), "float.idx", &bad);
    assert!(matches!(load_idx(&p), Err(Error::BadMagic { .. })));

    let mut short = header(&[2, 28, 28]);
    short.extend(vec![0u8; 1000]);
    let p = write_raw(dir.path(), "short.idx", &short);
    assert!(matches!(load_idx(&p), Err(Error::TruncatedFile(_))));

    let mut labels = header(&[5]);
    labels.extend([1, 2, 3, 4, 5]);
    let p = write_raw(dir.path(), "labels.idx", &labels);
    assert!(matches!(load_idx(&p), Err(Error::DimensionMismatch(_))));
}

#[test]
fn bundled_test_images_match_byte_count() {
    // first image nonzero count from an independent byte-level read of the file
    let set = load_idx(&mnist("t10k-images-idx3-ubyte.gz")).unwrap();
    assert_eq!((set.len(), set.dim()), (2000, 784));
    assert_eq!(set.sparsity()[0], 159);
    assert!(set.samples().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn idx_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let original = read_idx_bytes(&mnist("t10k-images-idx3-ubyte.gz")).unwrap();
    let p = dir.path().join("copy.idx");
    write_idx_bytes(&p, &original).unwrap();
    assert_eq!(read_idx_bytes(&p).unwrap(), original);
    assert_eq!(load_idx(&p).unwrap().samples(), load_idx(&mnist("t10k-images-idx3-ubyte.gz")).unwrap().samples());
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let slab = Slab {
        mean: 0.3,
        var: 1.7,
        bounds: None,
    };
    let set = synth_sparse(57, 0.4, slab, 9, &mut stream_rng(4, Stream::Synthetic(1))).unwrap();
    let p = dir.path().join("set.gsig");
    write_cache(&set, &p).unwrap();
    let back = load_signals(&p).unwrap();
    assert_eq!(back, set);
    let bits = |s: &SignalSet| s.samples().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&set));
}

#[test]
fn unit_column_scaling_has_unit_column_norms() {
    let x = Array1::<f64>::zeros(400);
    let mut total = 0.0;
    for seed in 0..5 {
        let (f, _) = sense(x.view(), 1.0, 0.0, Scaling::UnitColumn, &mut stream_rng(seed, Stream::Synthetic(0))).unwrap();
        total += f.columns().into_iter().map(|c| c.dot(&c)).sum::<f64>() / 400.0;
    }
    assert!((total / 5.0 - 1.0).abs() < 0.05);
}

#[test]
fn synthetic_sparsity_matches_rho() {
    let slab = Slab {
        mean: 0.0,
        var: 1.0,
        bounds: None,
    };
    let set = synth_sparse(1000, 0.2, slab, 100, &mut stream_rng(11, Stream::Synthetic(0))).unwrap();
    let mean: f64 = (0..100).map(|s| set.rho(s)).sum::<f64>() / 100.0;
    assert!((mean - 0.2).abs() < 0.012, "mean rho {mean}");

    let full = synth_sparse(50, 1.0, slab, 3, &mut stream_rng(1, Stream::Synthetic(0))).unwrap();
    assert_eq!(full.sparsity(), &[50, 50, 50]);
    let empty = synth_sparse(50, 0.0, slab, 3, &mut stream_rng(1, Stream::Synthetic(0))).unwrap();
    assert!(empty.samples().iter().all(|&v| v == 0.0));
}

#[test]
fn clipped_slab_stays_in_bounds() {
    let slab = Slab {
        mean: 0.5,
        var: 4.0,
        bounds: Some((0.0, 1.0)),
    };
    let set = synth_sparse(200, 0.5, slab, 5, &mut stream_rng(2, Stream::Synthetic(0))).unwrap();
    assert!(set.samples().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn pixel_priors_follow_column_statistics() {
    let set = load_idx(&mnist("train-images-idx3-ubyte.gz")).unwrap().head(500);
    let priors = estimate_pixel_priors(&set, Some((0.0, 1.0))).unwrap();
    assert_eq!(priors.len(), 784);
    // the corner pixel is never lit in MNIST
    match priors[0] {
        grbm_amp::Prior::TruncGaussBernoulli(t) => assert_eq!(t.rho(), 0.0),
        ref p => panic!("unexpected prior {p:?}"),
    }
    let centre = 14 * 28 + 14;
    let lit = set.samples().column(centre).iter().filter(|&&v| v > 0.0).count();
    match priors[centre] {
        grbm_amp::Prior::TruncGaussBernoulli(t) => assert_eq!(t.rho(), lit as f64 / 500.0),
        ref p => panic!("unexpected prior {p:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_instance(seed in any::<u64>(), image in 0u32..1000, alpha in 0.05f64..1.0) {
        let slab = Slab { mean: 0.0, var: 1.0, bounds: None };
        let draw = || {
            let mut rng = stream_rng(seed, Stream::Instance { image, alpha: 1, rep: 0 });
            let x = synth_sparse(60, 0.3, slab, 1, &mut stream_rng(seed, Stream::Synthetic(image))).unwrap();
            let (f, y) = sense(x.sample(0), alpha, 1e-8, Scaling::UnitColumn, &mut rng).unwrap();
            (x, f, y)
        };
        prop_assert_eq!(draw(), draw());
    }

    #[test]
    fn measurement_count_is_rounded(alpha in 0.01f64..=1.0, n in 100usize..2000) {
        let m = measurement_count(alpha, n).unwrap();
        prop_assert!((m as f64 - alpha * n as f64).abs() <= 0.5);
    }
}
