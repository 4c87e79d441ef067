#![allow(dead_code)]

use grbm_amp::prior::Prior;
use grbm_amp_oracles::Unit;
use rand::Rng;

pub fn to_unit(p: &Prior) -> Unit {
    match *p {
        Prior::Bernoulli { bias } => Unit::Binary { bias },
        Prior::GaussBernoulli { rho, mean, var } => Unit::SpikeSlab {
            rho,
            mu: mean,
            var,
            bounds: None,
        },
        Prior::TruncGaussBernoulli(t) => Unit::SpikeSlab {
            rho: t.rho(),
            mu: t.mean(),
            var: t.var(),
            bounds: Some((t.lo(), t.hi())),
        },
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Family {
    Bernoulli,
    GaussBernoulli,
    Truncated,
}

/// A random admissible `(prior, A, B)` triple for `family`.
pub fn random_case<R: Rng>(family: Family, rng: &mut R) -> (Prior, f64, f64) {
    match family {
        Family::Bernoulli => {
            let p = Prior::bernoulli(rng.random_range(-5.0..5.0)).unwrap();
            (p, rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0))
        }
        Family::GaussBernoulli => {
            let var = rng.random_range(0.05..4.0);
            let p = Prior::gauss_bernoulli(rng.random_range(0.01..0.99), rng.random_range(-2.0..2.0), var).unwrap();
            let a = rng.random_range(-0.9 / var..30.0);
            (p, a, rng.random_range(-10.0..10.0))
        }
        Family::Truncated => {
            let var = rng.random_range(0.005..2.0);
            let lo = rng.random_range(-1.0..0.0);
            let hi = rng.random_range(0.5..2.0);
            let p = Prior::truncated(rng.random_range(0.01..0.99), rng.random_range(-0.5..1.5), var, lo, hi).unwrap();
            (p, rng.random_range(-30.0..100.0), rng.random_range(-30.0..30.0))
        }
    }
}

/// Small GRBM with truncated visibles on `[0, 1]` and Bernoulli hiddens.
/// Couplings are `scale` times a fixed draw from `[-1, 1]`.
pub fn random_grbm<R: Rng>(n: usize, h: usize, scale: f64, rng: &mut R) -> grbm_amp::Grbm {
    let w = ndarray::Array2::from_shape_fn((n, h), |_| scale * rng.random_range(-1.0..1.0));
    let visible = (0..n)
        .map(|_| {
            Prior::truncated(
                rng.random_range(0.1..0.9),
                rng.random_range(0.0..1.0),
                rng.random_range(0.02..0.5),
                0.0,
                1.0,
            )
            .unwrap()
        })
        .collect();
    let hidden = (0..h).map(|_| Prior::bernoulli(rng.random_range(-1.5..1.5)).unwrap()).collect();
    grbm_amp::Grbm::new(w, visible, hidden).unwrap()
}

/// Exact marginals of `model` under external fields, by hidden-state enumeration.
pub fn exact_marginals(model: &grbm_amp::Grbm, ext_a: &[f64], ext_b: &[f64]) -> grbm_amp_oracles::Marginals {
    let w: Vec<Vec<f64>> = model.weights().rows().into_iter().map(|r| r.to_vec()).collect();
    let visible: Vec<Unit> = model.visible_priors().iter().map(to_unit).collect();
    let bias: Vec<f64> = model
        .hidden_priors()
        .iter()
        .map(|p| match *p {
            Prior::Bernoulli { bias } => bias,
            _ => panic!("enumeration needs Bernoulli hidden units"),
        })
        .collect();
    grbm_amp_oracles::enumerate_marginals(&w, &visible, &bias, ext_a, ext_b)
}
