//! TAP fixed-point inference on a generalized RBM.
//!
//! The model couples visible units `x` and hidden units `h` through
//! `exp(xᵀ W h)`, each unit carrying its own [`Prior`]. Under external
//! per-visible fields `(A, B)` from the outer AMP loop, the node beliefs
//! satisfy
//!
//! ```text
//! Aʰ_μ = -Σ_i W²_iμ cᵛ_i        Bʰ_μ = aʰ_μ Aʰ_μ + Σ_i W_iμ aᵛ_i
//! Aᵛ_i = -Σ_μ W²_iμ cʰ_μ        Bᵛ_i = aᵛ_i Aᵛ_i + Σ_μ W_iμ aʰ_μ
//! (aʰ, cʰ) = f_h(Aʰ, Bʰ)        (aᵛ, cᵛ) = f_v(A + Aᵛ, B + Bᵛ)
//! ```
//!
//! One sweep updates the four blocks in the order visible fields, visible
//! moments, hidden fields, hidden moments, each block reading the freshest
//! values of the others.

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::prior::{Prior, TiltedField};

/// Couplings plus per-unit priors. `weights` is `N × H` (visible × hidden).
#[derive(Debug, Clone, PartialEq)]
pub struct Grbm {
    weights: Array2<f64>,
    weights_sq: Array2<f64>,
    visible: Vec<Prior>,
    hidden: Vec<Prior>,
}

impl Grbm {
    pub fn new(weights: Array2<f64>, visible: Vec<Prior>, hidden: Vec<Prior>) -> Result<Self> {
        let (n, h) = weights.dim();
        if visible.len() != n || hidden.len() != h {
            return Err(Error::DimensionMismatch(format!(
                "weights are {n}x{h} but got {} visible and {} hidden priors",
                visible.len(),
                hidden.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", "non-finite entry"));
        }
        let weights_sq = weights.mapv(|w| w * w);
        Ok(Self {
            weights,
            weights_sq,
            visible,
            hidden,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.visible.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn visible_priors(&self) -> &[Prior] {
        &self.visible
    }

    pub fn hidden_priors(&self) -> &[Prior] {
        &self.hidden
    }

    /// Same priors, new couplings.
    pub fn with_weights(&self, weights: Array2<f64>) -> Result<Self> {
        Self::new(weights, self.visible.clone(), self.hidden.clone())
    }

    pub fn with_hidden_priors(&self, hidden: Vec<Prior>) -> Result<Self> {
        Self::new(self.weights.clone(), self.visible.clone(), hidden)
    }
}

/// Whether the Onsager term `a·A` in the `B` updates uses the previous
/// sweep's mean or is solved self-consistently with the current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnsagerTiming {
    #[default]
    PreviousSweep,
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapOptions {
    /// Stop when the largest change of a visible mean (and of the
    /// hidden contribution to the visible fields) drops below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Blend factor for the moment updates; `0` disables inner damping.
    pub damping: f64,
    pub onsager: OnsagerTiming,
}

impl Default for TapOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 100,
            damping: 0.0,
            onsager: OnsagerTiming::PreviousSweep,
        }
    }
}

impl TapOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol_in", "must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_inner", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid("inner_damping", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Node beliefs of the inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TapState {
    pub hidden_a: Array1<f64>,
    pub hidden_b: Array1<f64>,
    pub hidden_mean: Array1<f64>,
    pub hidden_var: Array1<f64>,
    pub visible_a: Array1<f64>,
    pub visible_b: Array1<f64>,
    pub visible_mean: Array1<f64>,
    pub visible_var: Array1<f64>,
}

impl TapState {
    /// Visible moments from the external fields alone, hidden moments zero.
    pub fn initial(model: &Grbm, ext_a: ArrayView1<f64>, ext_b: ArrayView1<f64>) -> Result<Self> {
        let n = model.n_visible();
        let h = model.n_hidden();
        let mut visible_mean = Array1::zeros(n);
        let mut visible_var = Array1::zeros(n);
        for i in 0..n {
            let m = visible_moments(&model.visible[i], ext_a[i], ext_b[i])?;
            visible_mean[i] = m.0;
            visible_var[i] = m.1;
        }
        Ok(Self {
            hidden_a: Array1::zeros(h),
            hidden_b: Array1::zeros(h),
            hidden_mean: Array1::zeros(h),
            hidden_var: Array1::zeros(h),
            visible_a: Array1::zeros(n),
            visible_b: Array1::zeros(n),
            visible_mean,
            visible_var,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TapOutcome {
    pub state: TapState,
    pub converged: bool,
    pub sweeps: usize,
}

fn visible_moments(prior: &Prior, a: f64, b: f64) -> Result<(f64, f64)> {
    match prior.posterior_moments(TiltedField::new(a, b)) {
        Ok(m) => Ok((m.mean, m.var)),
        Err(Error::NonNormalizable { precision }) => Err(Error::Config(format!(
            "untruncated visible prior {prior:?} met total precision {precision}; use a truncated prior with the GRBM"
        ))),
        Err(e) => Err(e),
    }
}

/// Runs TAP sweeps from `init` (or the default initialization) until the
/// beliefs stop moving or `options.max_sweeps` is reached.
pub fn infer(
    model: &Grbm,
    ext_a: ArrayView1<f64>,
    ext_b: ArrayView1<f64>,
    init: Option<TapState>,
    options: &TapOptions,
) -> Result<TapOutcome> {
    let n = model.n_visible();
    if ext_a.len() != n || ext_b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "external fields have length {}/{} for {n} visible units",
            ext_a.len(),
            ext_b.len()
        )));
    }
    if ext_a.iter().chain(ext_b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "tap external field",
            iteration: 0,
        });
    }
    options.validate()?;
    let mut state = match init {
        Some(s) => s,
        None => TapState::initial(model, ext_a, ext_b)?,
    };
    let column_scale: Array1<f64> = model
        .weights
        .columns()
        .into_iter()
        .map(|c| c.iter().fold(0.0f64, |m, w| m.max(w.abs())))
        .collect();
    let gamma = options.damping;

    for sweep in 1..=options.max_sweeps {
        // visible fields
        state.visible_a = -model.weights_sq.dot(&state.hidden_var);
        state.visible_b = &state.visible_mean * &state.visible_a + model.weights.dot(&state.hidden_mean);

        // visible moments
        let mut visible_change = 0.0f64;
        let coupling_field = model.weights.dot(&state.hidden_mean);
        for i in 0..n {
            let a_tot = ext_a[i] + state.visible_a[i];
            let (mut mean, mut var) = visible_moments(&model.visible[i], a_tot, ext_b[i] + state.visible_b[i])?;
            if options.onsager == OnsagerTiming::SelfConsistent {
                for _ in 0..50 {
                    let b = ext_b[i] + mean * state.visible_a[i] + coupling_field[i];
                    let next = visible_moments(&model.visible[i], a_tot, b)?;
                    let done = (next.0 - mean).abs() < 1e-13;
                    (mean, var) = next;
                    if done {
                        break;
                    }
                }
                state.visible_b[i] = mean * state.visible_a[i] + coupling_field[i];
            }
            let mean = gamma * state.visible_mean[i] + (1.0 - gamma) * mean;
            let var = gamma * state.visible_var[i] + (1.0 - gamma) * var;
            visible_change = visible_change.max((mean - state.visible_mean[i]).abs());
            state.visible_mean[i] = mean;
            state.visible_var[i] = var;
        }

        // hidden fields
        state.hidden_a = -model.weights_sq.t().dot(&state.visible_var);
        let visible_drive = model.weights.t().dot(&state.visible_mean);
        state.hidden_b = &state.hidden_mean * &state.hidden_a + &visible_drive;

        // hidden moments
        let mut hidden_change = 0.0f64;
        for mu in 0..model.n_hidden() {
            let a_h = state.hidden_a[mu];
            let field = TiltedField::new(a_h, state.hidden_b[mu]);
            let mut m = model.hidden[mu].posterior_moments(field)?;
            if options.onsager == OnsagerTiming::SelfConsistent {
                for _ in 0..50 {
                    let f = TiltedField::new(a_h, m.mean * a_h + visible_drive[mu]);
                    let next = model.hidden[mu].posterior_moments(f)?;
                    let done = (next.mean - m.mean).abs() < 1e-13;
                    m = next;
                    if done {
                        break;
                    }
                }
                state.hidden_b[mu] = m.mean * a_h + visible_drive[mu];
            }
            let mean = gamma * state.hidden_mean[mu] + (1.0 - gamma) * m.mean;
            let var = gamma * state.hidden_var[mu] + (1.0 - gamma) * m.var;
            let moved = (mean - state.hidden_mean[mu]).abs() + (var - state.hidden_var[mu]).abs();
            hidden_change = hidden_change.max(moved * column_scale[mu]);
            state.hidden_mean[mu] = mean;
            state.hidden_var[mu] = var;
        }

        let finite = Zip::from(&state.visible_mean)
            .and(&state.visible_var)
            .all(|m, v| m.is_finite() && v.is_finite())
            && state.hidden_mean.iter().all(|m| m.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                stage: "tap sweep",
                iteration: sweep,
            });
        }
        if visible_change.max(hidden_change) < options.tol {
            return Ok(TapOutcome {
                state,
                converged: true,
                sweeps: sweep,
            });
        }
    }
    Ok(TapOutcome {
        state,
        converged: false,
        sweeps: options.max_sweeps,
    })
}

/// TAP beliefs with no external field: the model's own marginals.
pub fn marginals(model: &Grbm, options: &TapOptions) -> Result<TapOutcome> {
    let zeros = Array1::zeros(model.n_visible());
    infer(model, zeros.view(), zeros.view(), None, options)
}
