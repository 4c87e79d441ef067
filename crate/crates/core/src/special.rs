//! Scalar special functions used by the moment computations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

pub(crate) const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        if x < -26.6 {
            return f64::INFINITY;
        }
        return 2.0 * exp_sq(x) - erfcx(-x);
    }
    if x < 25.0 {
        return exp_sq(x) * libm::erfc(x);
    }
    // asymptotic series, converged to machine precision for x ≥ 25
    let inv2x2 = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..12 {
        term *= -((2 * k - 1) as f64) * inv2x2;
        sum += term;
    }
    FRAC_1_SQRT_PI / x * sum
}

/// `exp(x²)` with the rounding error of `x²` folded back in.
fn exp_sq(x: f64) -> f64 {
    let x2 = x * x;
    let err = x.mul_add(x, -x2);
    x2.exp() * (1.0 + err)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(t: f64) -> f64 {
    (-0.5 * t * t - LN_SQRT_2PI).exp()
}

/// `ln Q(t)` where `Q(t) = P(Z > t)` for a standard normal `Z`.
pub fn ln_norm_sf(t: f64) -> f64 {
    if t > 0.0 {
        (0.5 * erfcx(t * FRAC_1_SQRT_2)).ln() - 0.5 * t * t
    } else {
        (0.5 * libm::erfc(t * FRAC_1_SQRT_2)).ln()
    }
}

/// Inverse Mills ratio `φ(t)/Q(t)`, the negated derivative of `ln Q`.
pub fn inv_mills(t: f64) -> f64 {
    if t > 0.0 {
        SQRT_2_OVER_PI / erfcx(t * FRAC_1_SQRT_2)
    } else {
        norm_pdf(t) / (0.5 * libm::erfc(t * FRAC_1_SQRT_2))
    }
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^t)`.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `ln(e^x + e^y)`, treating `-inf` as an empty term.
#[inline]
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    let top = x.max(y);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + ((x - top).exp() + (y - top).exp()).ln()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for k in 0..half {
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        Self { nodes, weights }
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub(crate) fn gauss_legendre_64() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}
