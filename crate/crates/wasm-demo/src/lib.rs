//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function has a plain Rust counterpart (`*_impl`) that the
//! native tests call directly.

use grbm_amp::amp::{AmpState, PriorMode, SolverOptions};
use grbm_amp::data::{make_instance, stream_rng, synth_sparse, Scaling, Slab, Stream};
use grbm_amp::experiment::metrics::{correlation, mse_db};
use grbm_amp::{Prior, TiltedField};
use wasm_bindgen::prelude::*;

type Res<T> = Result<T, String>;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

fn prior_from(kind: &str, rho: f64, mean: f64, var: f64) -> Res<Prior> {
    let p = match kind {
        "bernoulli" => Prior::bernoulli(mean),
        "gauss-bernoulli" => Prior::gauss_bernoulli(rho, mean, var),
        "truncated" => Prior::truncated(rho, mean, var, 0.0, 1.0),
        _ => return Err(format!("unknown prior `{kind}`")),
    };
    p.map_err(|e| e.to_string())
}

/// Posterior mean and variance of one tilted prior as `B` sweeps a range.
#[wasm_bindgen]
pub struct Curve {
    b: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn b(&self) -> Vec<f64> {
        self.b.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn var(&self) -> Vec<f64> {
        self.var.clone()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn prior_curve_impl(kind: &str, rho: f64, mean: f64, var: f64, a: f64, b_lo: f64, b_hi: f64, points: usize) -> Res<Curve> {
    let prior = prior_from(kind, rho, mean, var)?;
    let points = points.max(2);
    let mut c = Curve {
        b: Vec::with_capacity(points),
        mean: Vec::with_capacity(points),
        var: Vec::with_capacity(points),
    };
    for k in 0..points {
        let b = b_lo + (b_hi - b_lo) * k as f64 / (points - 1) as f64;
        let m = prior
            .posterior_moments(TiltedField::new(a, b))
            .map_err(|e| e.to_string())?;
        c.b.push(b);
        c.mean.push(m.mean);
        c.var.push(m.var);
    }
    Ok(c)
}

/// `kind` is `bernoulli` (bias in `mean`), `gauss-bernoulli` or
/// `truncated` (slab cut to [0, 1]).
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn prior_curve(kind: &str, rho: f64, mean: f64, var: f64, a: f64, b_lo: f64, b_hi: f64, points: usize) -> Result<Curve, JsError> {
    prior_curve_impl(kind, rho, mean, var, a, b_lo, b_hi, points).map_err(js)
}

/// One AMP reconstruction of a synthetic spike-and-slab signal.
#[wasm_bindgen]
pub struct Run {
    truth: Vec<f64>,
    estimate: Vec<f64>,
    trace: Vec<f64>,
    converged: bool,
}

#[wasm_bindgen]
impl Run {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }
    /// MSE in dB after each iteration.
    #[wasm_bindgen(getter)]
    pub fn trace(&self) -> Vec<f64> {
        self.trace.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
    #[wasm_bindgen(getter)]
    pub fn correlation(&self) -> f64 {
        correlation(
            ndarray::ArrayView1::from(&self.truth[..]),
            ndarray::ArrayView1::from(&self.estimate[..]),
        )
        .value
    }
}

const SLAB: Slab = Slab {
    mean: 0.0,
    var: 1.0,
    bounds: None,
};

pub fn reconstruct_impl(n: usize, rho: f64, alpha: f64, damping: f64, max_iter: usize, seed: u32) -> Res<Run> {
    let err = |e: grbm_amp::Error| e.to_string();
    let signal = synth_sparse(n, rho, SLAB, 1, &mut stream_rng(seed as u64, Stream::Synthetic(0))).map_err(err)?;
    let x = signal.sample(0);
    let mut rng = stream_rng(
        seed as u64,
        Stream::Instance {
            image: 0,
            alpha: 0,
            rep: 0,
        },
    );
    let inst = make_instance(x, alpha, 1e-8, Scaling::UnitColumn, &mut rng).map_err(err)?;
    let prior = Prior::gauss_bernoulli(rho.max(1e-6), SLAB.mean, SLAB.var).map_err(err)?;
    let mut options = SolverOptions::new(PriorMode::iid(prior, n));
    options.damping = damping;
    options.validate().map_err(err)?;
    let mut state = AmpState::initial(&inst, &options).map_err(err)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let (change, _) = grbm_amp::amp::step(&mut state, &inst, &options).map_err(err)?;
        trace.push(mse_db(x, state.a.view()));
        if change < options.tol_out {
            converged = true;
            break;
        }
    }
    Ok(Run {
        truth: x.to_vec(),
        estimate: state.a.to_vec(),
        trace,
        converged,
    })
}

/// Gauss-Bernoulli signal of length `n` and sparsity `rho`, sensed at rate
/// `alpha` and reconstructed with the matched i.i.d. prior.
#[wasm_bindgen]
pub fn reconstruct(n: usize, rho: f64, alpha: f64, damping: f64, max_iter: usize, seed: u32) -> Result<Run, JsError> {
    reconstruct_impl(n, rho, alpha, damping, max_iter, seed).map_err(js)
}

pub fn phase_grid_impl(n: usize, steps: usize, seed: u32) -> Res<Vec<f64>> {
    let mut out = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        let alpha = (i as f64 + 0.5) / steps as f64;
        for j in 0..steps {
            let rho = (j as f64 + 0.5) / steps as f64;
            let run = reconstruct_impl(n, rho, alpha, 0.0, 250, seed.wrapping_add((i * steps + j) as u32))?;
            out.push(*run.trace.last().unwrap_or(&0.0));
        }
    }
    Ok(out)
}

/// Final MSE in dB on a `steps`×`steps` grid of cell-centred `(alpha, rho)`
/// values, alpha-major.
#[wasm_bindgen]
pub fn phase_grid(n: usize, steps: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    phase_grid_impl(n, steps, seed).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_are_monotone_in_b() {
        for kind in ["bernoulli", "gauss-bernoulli", "truncated"] {
            let c = prior_curve_impl(kind, 0.3, 0.4, 0.5, 1.0, -5.0, 5.0, 41).unwrap();
            assert_eq!(c.b.len(), 41);
            assert!(c.mean.windows(2).all(|w| w[1] >= w[0]), "{kind}");
            assert!(c.var.iter().all(|&v| v >= 0.0));
        }
        assert!(prior_curve_impl("cauchy", 0.3, 0.0, 1.0, 1.0, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn easy_instance_is_recovered() {
        let run = reconstruct_impl(300, 0.1, 0.6, 0.0, 200, 1).unwrap();
        assert!(run.converged);
        assert!(*run.trace.last().unwrap() < -40.0);
        assert!(run.correlation() > 0.999);
    }

    #[test]
    fn grid_separates_easy_and_hard_corners() {
        let g = phase_grid_impl(100, 3, 2).unwrap();
        assert_eq!(g.len(), 9);
        // high alpha, low rho versus low alpha, high rho
        assert!(g[6] < -30.0 && g[2] > -10.0, "{g:?}");
    }
}
