//! AMP for the additive white Gaussian noise channel `y = F x + w`.
//!
//! Each outer iteration runs [`channel_update`], [`field_update`] and
//! [`prior_update`] in turn. The prior step either evaluates a factorized
//! prior coefficient by coefficient or runs TAP inference on a [`Grbm`]
//! under the AMP fields.

use std::sync::Arc;

use ndarray::{Array1, Array2, Zip};

use crate::error::{Error, Result};
use crate::prior::{Prior, TiltedField};
use crate::tap::{self, Grbm, TapOptions, TapState};

/// Sensing matrix, observations, noise variance and (optionally) the truth.
#[derive(Debug, Clone)]
pub struct CsInstance {
    f: Array2<f64>,
    f_sq: Array2<f64>,
    y: Array1<f64>,
    delta: f64,
    truth: Option<Array1<f64>>,
}

impl CsInstance {
    pub fn new(f: Array2<f64>, y: Array1<f64>, delta: f64, truth: Option<Array1<f64>>) -> Result<Self> {
        let (m, n) = f.dim();
        if y.len() != m {
            return Err(Error::DimensionMismatch(format!("F is {m}x{n} but y has length {}", y.len())));
        }
        if let Some(x) = &truth {
            if x.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "F is {m}x{n} but the ground truth has length {}",
                    x.len()
                )));
            }
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid("delta", "noise variance must be positive and finite"));
        }
        if f.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("instance", "F and y must be finite"));
        }
        let f_sq = f.mapv(|v| v * v);
        Ok(Self {
            f,
            f_sq,
            y,
            delta,
            truth,
        })
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    pub fn f(&self) -> &Array2<f64> {
        &self.f
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn truth(&self) -> Option<&Array1<f64>> {
        self.truth.as_ref()
    }
}

/// How the estimate is closed at each outer iteration.
#[derive(Debug, Clone)]
pub enum PriorMode {
    /// One prior per coefficient.
    Factorized(Vec<Prior>),
    Grbm(Arc<Grbm>),
}

impl PriorMode {
    pub fn iid(prior: Prior, n: usize) -> Self {
        PriorMode::Factorized(vec![prior; n])
    }

    fn len(&self) -> usize {
        match self {
            PriorMode::Factorized(p) => p.len(),
            PriorMode::Grbm(g) => g.n_visible(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Weight of the previous `(a, c)` when blending in the new moments.
    pub damping: f64,
    /// Stop once the mean absolute change of `a` falls below this.
    pub tol_out: f64,
    pub max_outer: usize,
    pub tap: TapOptions,
    pub prior: PriorMode,
}

impl SolverOptions {
    /// Defaults for `prior`: damping 0.5 for a GRBM, none for a factorized
    /// prior.
    pub fn new(prior: PriorMode) -> Self {
        let damping = match prior {
            PriorMode::Factorized(_) => 0.0,
            PriorMode::Grbm(_) => 0.5,
        };
        Self {
            damping,
            tol_out: 1e-7,
            max_outer: 250,
            tap: TapOptions::default(),
            prior,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid("damping", "must lie in [0, 1)"));
        }
        if !(self.tol_out > 0.0) {
            return Err(Error::invalid("tol_out", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer", "must be at least 1"));
        }
        self.tap.validate()
    }
}

/// Per-coefficient `(a, c, A, B)` and per-measurement `(V, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub a: Array1<f64>,
    pub c: Array1<f64>,
    pub v: Array1<f64>,
    pub omega: Array1<f64>,
    /// Effective precision `A`.
    pub precision: Array1<f64>,
    /// Effective field `B`.
    pub field: Array1<f64>,
}

impl AmpState {
    /// Prior moments at zero field, `ω = y`, `V = 1`.
    ///
    /// In GRBM mode the zero-field moments are the model's TAP marginals.
    pub fn initial(instance: &CsInstance, options: &SolverOptions) -> Result<Self> {
        let n = instance.n();
        if options.prior.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "prior covers {} coefficients, instance has {n}",
                options.prior.len()
            )));
        }
        let (a, c) = match &options.prior {
            PriorMode::Factorized(priors) => {
                let mut a = Array1::zeros(n);
                let mut c = Array1::zeros(n);
                for (i, p) in priors.iter().enumerate() {
                    let m = p.zero_field_moments();
                    a[i] = m.mean;
                    c[i] = m.var;
                }
                (a, c)
            }
            PriorMode::Grbm(model) => {
                let out = tap::marginals(model, &options.tap)?;
                (out.state.visible_mean, out.state.visible_var)
            }
        };
        Ok(Self {
            a,
            c,
            v: Array1::ones(instance.m()),
            omega: instance.y.clone(),
            precision: Array1::zeros(n),
            field: Array1::zeros(n),
        })
    }
}

fn check_finite(values: &Array1<f64>, stage: &'static str, iteration: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { stage, iteration })
    }
}

/// `V = F²c`, `ω = F a − V (y − ω_prev) / (Δ + V_prev)`.
pub fn channel_update(state: &mut AmpState, instance: &CsInstance) -> Result<()> {
    let v = instance.f_sq.dot(&state.c);
    let mut omega = instance.f.dot(&state.a);
    Zip::from(&mut omega)
        .and(&v)
        .and(&instance.y)
        .and(&state.omega)
        .and(&state.v)
        .for_each(|w, &v, &y, &w_prev, &v_prev| {
            *w -= v * (y - w_prev) / (instance.delta + v_prev);
        });
    check_finite(&v, "channel variance", 0)?;
    check_finite(&omega, "channel prediction", 0)?;
    state.v = v;
    state.omega = omega;
    Ok(())
}

/// `A = (F²)ᵀ 1/(Δ+V)`, `B = A a + Fᵀ (y − ω)/(Δ+V)`.
pub fn field_update(state: &mut AmpState, instance: &CsInstance) -> Result<()> {
    let inv = state.v.mapv(|v| 1.0 / (instance.delta + v));
    let residual = Zip::from(&instance.y)
        .and(&state.omega)
        .and(&inv)
        .map_collect(|&y, &w, &s| (y - w) * s);
    let precision = instance.f_sq.t().dot(&inv);
    let field = &precision * &state.a + instance.f.t().dot(&residual);
    check_finite(&precision, "effective precision", 0)?;
    check_finite(&field, "effective field", 0)?;
    state.precision = precision;
    state.field = field;
    Ok(())
}

/// Inner-loop bookkeeping for one [`prior_update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InnerReport {
    pub iterations: usize,
    pub converged: bool,
}

/// New `(a, c)` from the prior at the current `(A, B)`, blended with the
/// previous values by `options.damping`.
pub fn prior_update(state: &mut AmpState, options: &SolverOptions) -> Result<InnerReport> {
    let n = state.a.len();
    let (a_new, c_new, report) = match &options.prior {
        PriorMode::Factorized(priors) => {
            let mut a = Array1::zeros(n);
            let mut c = Array1::zeros(n);
            for i in 0..n {
                let m = priors[i].posterior_moments(TiltedField::new(state.precision[i], state.field[i]))?;
                a[i] = m.mean;
                c[i] = m.var;
            }
            (
                a,
                c,
                InnerReport {
                    iterations: 0,
                    converged: true,
                },
            )
        }
        PriorMode::Grbm(model) => {
            let init = TapState::initial(model, state.precision.view(), state.field.view())?;
            let out = tap::infer(model, state.precision.view(), state.field.view(), Some(init), &options.tap)?;
            (
                out.state.visible_mean,
                out.state.visible_var,
                InnerReport {
                    iterations: out.sweeps,
                    converged: out.converged,
                },
            )
        }
    };
    let g = options.damping;
    if g == 0.0 {
        state.a = a_new;
        state.c = c_new;
    } else {
        Zip::from(&mut state.a).and(&a_new).for_each(|a, &n| *a = g * *a + (1.0 - g) * n);
        Zip::from(&mut state.c).and(&c_new).for_each(|c, &n| *c = g * *c + (1.0 - g) * n);
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Mean `|Δa|` after each outer iteration.
    pub mean_abs_change: Vec<f64>,
    /// Inner sweeps per outer iteration (zeros in factorized mode).
    pub inner_iterations: Vec<usize>,
    pub inner_nonconverged: usize,
    pub converged: bool,
}

impl Diagnostics {
    pub fn inner_total(&self) -> usize {
        self.inner_iterations.iter().sum()
    }

    pub fn last_change(&self) -> Option<f64> {
        self.mean_abs_change.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub state: AmpState,
    pub diagnostics: Diagnostics,
}

impl Reconstruction {
    pub fn mean(&self) -> &Array1<f64> {
        &self.state.a
    }

    pub fn variance(&self) -> &Array1<f64> {
        &self.state.c
    }
}

/// One outer iteration; returns the mean absolute change of `a`.
pub fn step(state: &mut AmpState, instance: &CsInstance, options: &SolverOptions) -> Result<(f64, InnerReport)> {
    let before = state.a.clone();
    channel_update(state, instance)?;
    field_update(state, instance)?;
    let report = prior_update(state, options)?;
    check_finite(&state.a, "posterior mean", 0)?;
    check_finite(&state.c, "posterior variance", 0)?;
    let change = Zip::from(&state.a)
        .and(&before)
        .fold(0.0, |s, &a, &b| s + (a - b).abs())
        / state.a.len().max(1) as f64;
    Ok((change, report))
}

/// Iterates until the mean `|Δa|` drops below `tol_out` or `max_outer`
/// iterations have run. Hitting the cap is not an error; check
/// `diagnostics.converged`.
pub fn reconstruct(instance: &CsInstance, options: &SolverOptions) -> Result<Reconstruction> {
    options.validate()?;
    let mut state = AmpState::initial(instance, options)?;
    let mut diag = Diagnostics::default();
    for t in 1..=options.max_outer {
        let (change, report) = step(&mut state, instance, options).map_err(|e| match e {
            Error::NonFinite { stage, .. } => Error::NonFinite { stage, iteration: t },
            other => other,
        })?;
        diag.iterations = t;
        diag.mean_abs_change.push(change);
        diag.inner_iterations.push(report.iterations);
        if !report.converged {
            diag.inner_nonconverged += 1;
        }
        if change < options.tol_out {
            diag.converged = true;
            break;
        }
    }
    if let Some(x) = instance.truth() {
        let mse = Zip::from(x).and(&state.a).fold(0.0, |s, &x, &a| s + (x - a) * (x - a)) / x.len() as f64;
        log::debug!(
            "amp finished after {} iterations: mse {mse:.3e}, mean variance {:.3e}",
            diag.iterations,
            state.c.mean().unwrap_or(0.0)
        );
    }
    if diag.inner_nonconverged > 0 {
        log::debug!("{} outer iterations ended with an unconverged inner loop", diag.inner_nonconverged);
    }
    Ok(Reconstruction {
        state,
        diagnostics: diag,
    })
}
