//! Scalar unit distributions and their tilted moments.
//!
//! Every prior here is used through the tilted distribution
//!
//! ```text
//! Q(x) ∝ P0(x) exp(-A x²/2 + B x)
//! ```
//!
//! whose log-normalizer, mean and variance are the `f_a`, `f_c` functions
//! consumed by both the AMP outer loop and the TAP inner loop. The spike is an
//! exact atom at zero; it enters only through its log-mass.

mod slab;

use rand::Rng;
use rand_distr::StandardNormal;

pub use slab::{route as truncated_slab_route, SlabRoute, EPS_PREC, MIN_STD_WIDTH, TAIL_LIMIT};

use crate::error::{Error, Result};
use crate::special::{log_add_exp, sigmoid, softplus, LN_SQRT_2PI};

/// External field `(A, B)` acting on one unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TiltedField {
    /// Effective precision; may be negative for truncated and binary units.
    pub a: f64,
    /// Effective linear field.
    pub b: f64,
}

impl TiltedField {
    pub const ZERO: TiltedField = TiltedField { a: 0.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Tilted posterior mean and variance of one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

/// Spike-and-slab with a Gaussian slab restricted to `[lo, hi]`.
///
/// The slab is renormalized over the interval, so the prior has total mass
/// one on `[lo, hi] ∪ {0}`. The log-normalizer of the restricted slab is
/// cached at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncated {
    rho: f64,
    mean: f64,
    var: f64,
    lo: f64,
    hi: f64,
    ln_slab_norm: f64,
}

impl Truncated {
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    pub fn var(&self) -> f64 {
        self.var
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Binary unit on `{0, 1}` with unnormalized weights `{1, e^bias}`.
    Bernoulli { bias: f64 },
    /// `(1 - rho) δ(x) + rho N(x; mean, var)`.
    GaussBernoulli { rho: f64, mean: f64, var: f64 },
    /// Spike-and-slab with the slab truncated to `[lo, hi]`.
    TruncGaussBernoulli(Truncated),
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} outside [0, 1]")));
    }
    Ok(())
}

fn check_var(var: f64) -> Result<()> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::invalid("var", format!("{var} must be positive and finite")));
    }
    Ok(())
}

impl Prior {
    pub fn bernoulli(bias: f64) -> Result<Self> {
        if bias.is_nan() {
            return Err(Error::invalid("bias", "NaN"));
        }
        Ok(Prior::Bernoulli { bias })
    }

    pub fn gauss_bernoulli(rho: f64, mean: f64, var: f64) -> Result<Self> {
        check_rho(rho)?;
        check_var(var)?;
        if !mean.is_finite() {
            return Err(Error::invalid("mean", "not finite"));
        }
        Ok(Prior::GaussBernoulli { rho, mean, var })
    }

    pub fn truncated(rho: f64, mean: f64, var: f64, lo: f64, hi: f64) -> Result<Self> {
        check_rho(rho)?;
        check_var(var)?;
        if !mean.is_finite() {
            return Err(Error::invalid("mean", "not finite"));
        }
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("bounds", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        let ln_slab_norm = slab::truncated(1.0 / var, mean / var, lo, hi).ln_mass;
        if !ln_slab_norm.is_finite() {
            return Err(Error::NumericalOverflow {
                what: "truncated slab normalizer",
            });
        }
        Ok(Prior::TruncGaussBernoulli(Truncated {
            rho,
            mean,
            var,
            lo,
            hi,
            ln_slab_norm,
        }))
    }

    /// Sparsity `rho` of a spike-and-slab prior; `None` for binary units.
    pub fn rho(&self) -> Option<f64> {
        match self {
            Prior::Bernoulli { .. } => None,
            Prior::GaussBernoulli { rho, .. } => Some(*rho),
            Prior::TruncGaussBernoulli(t) => Some(t.rho),
        }
    }

    /// Truncation bounds, if any.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Prior::TruncGaussBernoulli(t) => Some((t.lo, t.hi)),
            _ => None,
        }
    }

    /// Log-masses of the spike and slab components under the tilt, plus the
    /// slab's own normalized moments.
    fn components(&self, field: TiltedField) -> Result<(f64, f64, slab::SlabMoments)> {
        let (rho, mean, var) = match *self {
            Prior::Bernoulli { .. } => unreachable!("binary units have no slab"),
            Prior::GaussBernoulli { rho, mean, var } => (rho, mean, var),
            Prior::TruncGaussBernoulli(t) => (t.rho, t.mean, t.var),
        };
        let precision = field.a + 1.0 / var;
        let linear = field.b + mean / var;
        let spike = if rho < 1.0 { (-rho).ln_1p() } else { f64::NEG_INFINITY };
        let (slab, ln_prior_norm) = match *self {
            Prior::GaussBernoulli { .. } => {
                if !(precision > 0.0) {
                    return Err(Error::NonNormalizable { precision });
                }
                let prior_norm = 0.5 * (2.0 * std::f64::consts::PI * var).ln() + 0.5 * mean * mean / var;
                (slab::untruncated(precision, linear), prior_norm)
            }
            Prior::TruncGaussBernoulli(t) => (slab::truncated(precision, linear, t.lo, t.hi), t.ln_slab_norm),
            Prior::Bernoulli { .. } => unreachable!(),
        };
        let slab_log = if rho > 0.0 {
            rho.ln() + slab.ln_mass - ln_prior_norm
        } else {
            f64::NEG_INFINITY
        };
        if slab_log.is_nan() || slab_log == f64::INFINITY {
            return Err(Error::NumericalOverflow { what: "slab log-mass" });
        }
        Ok((spike, slab_log, slab))
    }

    /// `ln Z(A, B) = ln ∫ P0(x) exp(-A x²/2 + B x) dx`.
    pub fn log_partition(&self, field: TiltedField) -> Result<f64> {
        check_field(field)?;
        match *self {
            Prior::Bernoulli { bias } => Ok(softplus(bias + field.b - 0.5 * field.a)),
            _ => {
                let (spike, slab, _) = self.components(field)?;
                let z = log_add_exp(spike, slab);
                if !z.is_finite() {
                    return Err(Error::NumericalOverflow { what: "log-partition" });
                }
                Ok(z)
            }
        }
    }

    /// Tilted mean `∂ ln Z/∂B` and variance `∂² ln Z/∂B²`.
    pub fn posterior_moments(&self, field: TiltedField) -> Result<Moments> {
        check_field(field)?;
        match *self {
            Prior::Bernoulli { bias } => {
                let p = sigmoid(bias + field.b - 0.5 * field.a);
                Ok(Moments {
                    mean: p,
                    var: p * (1.0 - p),
                })
            }
            _ => {
                let (spike, slab_log, slab) = self.components(field)?;
                let w = if slab_log == f64::NEG_INFINITY {
                    0.0
                } else if spike == f64::NEG_INFINITY {
                    1.0
                } else {
                    sigmoid(slab_log - spike)
                };
                let mean = w * slab.mean;
                let var = w * slab.var + w * (1.0 - w) * slab.mean * slab.mean;
                Ok(Moments { mean, var })
            }
        }
    }

    /// Mean and variance of the prior itself.
    pub fn zero_field_moments(&self) -> Moments {
        self.posterior_moments(TiltedField::ZERO)
            .expect("zero field is admissible for every validated prior")
    }

    /// Exact draw from the tilted distribution.
    pub fn sample<R: Rng + ?Sized>(&self, field: TiltedField, rng: &mut R) -> Result<f64> {
        check_field(field)?;
        match *self {
            Prior::Bernoulli { bias } => {
                let p = sigmoid(bias + field.b - 0.5 * field.a);
                Ok(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            }
            _ => {
                let (spike, slab_log, slab) = self.components(field)?;
                let w = if slab_log == f64::NEG_INFINITY {
                    0.0
                } else if spike == f64::NEG_INFINITY {
                    1.0
                } else {
                    sigmoid(slab_log - spike)
                };
                if w == 0.0 || rng.random::<f64>() >= w {
                    return Ok(0.0);
                }
                Ok(match *self {
                    Prior::GaussBernoulli { .. } => {
                        let z: f64 = rng.sample(StandardNormal);
                        slab.mean + slab.var.sqrt() * z
                    }
                    Prior::TruncGaussBernoulli(t) => {
                        let precision = field.a + 1.0 / t.var;
                        let linear = field.b + t.mean / t.var;
                        slab::sample_truncated(precision, linear, t.lo, t.hi, rng)
                    }
                    Prior::Bernoulli { .. } => unreachable!(),
                })
            }
        }
    }

    /// Log-density of the prior's slab component at `x` (normalized), used
    /// by diagnostics.
    pub fn slab_log_density(&self, x: f64) -> Option<f64> {
        match *self {
            Prior::Bernoulli { .. } => None,
            Prior::GaussBernoulli { mean, var, .. } => Some(-0.5 * (x - mean).powi(2) / var - 0.5 * var.ln() - LN_SQRT_2PI),
            Prior::TruncGaussBernoulli(t) => {
                if x < t.lo || x > t.hi {
                    Some(f64::NEG_INFINITY)
                } else {
                    Some(x * (t.mean / t.var - 0.5 * x / t.var) - t.ln_slab_norm)
                }
            }
        }
    }
}

fn check_field(field: TiltedField) -> Result<()> {
    if !(field.a.is_finite() && field.b.is_finite()) {
        return Err(Error::NonFinite {
            stage: "tilted field",
            iteration: 0,
        });
    }
    Ok(())
}
