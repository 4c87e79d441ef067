//! Mass and moments of `exp(-P x²/2 + L x)` on an interval or the real line.
//!
//! The closed-form branch uses scaled error functions in coordinates
//! anchored at the bound nearest the Gaussian mode. It is used only where it
//! is well conditioned: total precision above [`EPS_PREC`], a standardized
//! interval width of at least [`MIN_STD_WIDTH`], and the nearest bound no
//! further than [`TAIL_LIMIT`] standard deviations from the mode. Everything
//! else (including negative precision) goes through adaptive panels of
//! 64-point Gauss–Legendre quadrature in log-domain.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use crate::special::{erfcx, gauss_legendre_64, inv_mills, ln_norm_sf, norm_pdf, SQRT_2_OVER_PI};

/// Total slab precision below which the closed form is never used.
pub const EPS_PREC: f64 = 1e-8;
/// Minimum interval width in standard deviations for the closed form.
pub const MIN_STD_WIDTH: f64 = 1.0;
/// Maximum distance (in standard deviations) between mode and nearest bound
/// for the closed form.
pub const TAIL_LIMIT: f64 = 5.0;

/// Panels whose largest log-weight falls this far below the global maximum
/// are dropped.
const NEGLIGIBLE_LOG: f64 = 50.0;
/// Largest variation of the exponent across one Gauss–Legendre panel.
const PANEL_SPAN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SlabMoments {
    pub ln_mass: f64,
    pub mean: f64,
    pub var: f64,
}

/// Which evaluation route a truncated slab takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlabRoute {
    ClosedForm,
    Quadrature,
}

pub(crate) fn untruncated(p: f64, l: f64) -> SlabMoments {
    debug_assert!(p > 0.0);
    let mean = l / p;
    SlabMoments {
        ln_mass: 0.5 * (2.0 * PI / p).ln() + 0.5 * l * mean,
        mean,
        var: 1.0 / p,
    }
}

pub fn route(p: f64, l: f64, lo: f64, hi: f64) -> SlabRoute {
    if p <= EPS_PREC {
        return SlabRoute::Quadrature;
    }
    let sp = p.sqrt();
    if sp * (hi - lo) < MIN_STD_WIDTH {
        return SlabRoute::Quadrature;
    }
    let m = l / p;
    let a = (lo - m) * sp;
    let b = (hi - m) * sp;
    let nearest = if a.abs() <= b.abs() { a } else { -b };
    if nearest > TAIL_LIMIT {
        SlabRoute::Quadrature
    } else {
        SlabRoute::ClosedForm
    }
}

pub(crate) fn truncated(p: f64, l: f64, lo: f64, hi: f64) -> SlabMoments {
    match route(p, l, lo, hi) {
        SlabRoute::ClosedForm => closed_form(p, l, lo, hi),
        SlabRoute::Quadrature => quadrature(p, l, lo, hi),
    }
}

fn closed_form(p: f64, l: f64, lo: f64, hi: f64) -> SlabMoments {
    let sp = p.sqrt();
    let m = l / p;
    let a = (lo - m) * sp;
    let b = (hi - m) * sp;
    if a.abs() > b.abs() {
        let r = closed_form(p, -l, -hi, -lo);
        return SlabMoments { mean: -r.mean, ..r };
    }
    let s = 1.0 / sp;
    let half_ln = 0.5 * (2.0 * PI / p).ln();
    if a <= 0.0 {
        // mode inside the interval (up to orientation)
        let z = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2));
        let pa = norm_pdf(a);
        let pb = norm_pdf(b);
        let m1 = (pa - pb) / z;
        let e2 = 1.0 + (a * pa - b * pb) / z;
        SlabMoments {
            ln_mass: half_ln + 0.5 * l * m + z.ln(),
            mean: m + s * m1,
            var: s * s * (e2 - m1 * m1).max(0.0),
        }
    } else {
        let delta = 0.5 * (b - a) * (a + b);
        let decay = (-delta).exp();
        let d = erfcx(a * FRAC_1_SQRT_2) - decay * erfcx(b * FRAC_1_SQRT_2);
        let m1 = SQRT_2_OVER_PI * (-(-delta).exp_m1()) / d;
        let e2 = 1.0 + SQRT_2_OVER_PI * (a - b * decay) / d;
        let g_lo = lo * (l - 0.5 * p * lo);
        SlabMoments {
            ln_mass: half_ln + g_lo + (0.5 * d).ln(),
            mean: lo + s * (m1 - a),
            var: s * s * (e2 - m1 * m1).max(0.0),
        }
    }
}

/// Log-weight of the slab integrand and its slope.
#[derive(Clone, Copy)]
struct Exponent {
    p: f64,
    l: f64,
}

impl Exponent {
    #[inline]
    fn at(self, x: f64) -> f64 {
        x * (self.l - 0.5 * self.p * x)
    }

    #[inline]
    fn slope(self, x: f64) -> f64 {
        self.l - self.p * x
    }

    fn max_on(self, u: f64, v: f64) -> (f64, f64) {
        let (mut best, mut arg) = (self.at(u), u);
        let gv = self.at(v);
        if gv > best {
            best = gv;
            arg = v;
        }
        if self.p > 0.0 {
            let vertex = self.l / self.p;
            if vertex > u && vertex < v {
                let gx = self.at(vertex);
                if gx > best {
                    best = gx;
                    arg = vertex;
                }
            }
        }
        (best, arg)
    }
}

/// Visits the Gauss–Legendre panels that carry non-negligible mass,
/// passing `(node, log_weight)` pairs to `visit`. Returns the global
/// maximum of the exponent used as shift and its location.
fn for_each_node(g: Exponent, lo: f64, hi: f64, mut visit: impl FnMut(f64, f64)) -> (f64, f64) {
    let (gmax, argmax) = g.max_on(lo, hi);
    let rule = gauss_legendre_64();
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((u, v, depth)) = stack.pop() {
        if g.max_on(u, v).0 < gmax - NEGLIGIBLE_LOG {
            continue;
        }
        let span = g.slope(u).abs().max(g.slope(v).abs()) * (v - u);
        if span > PANEL_SPAN && depth < 64 {
            let mid = 0.5 * (u + v);
            stack.push((mid, v, depth + 1));
            stack.push((u, mid, depth + 1));
            continue;
        }
        let c = 0.5 * (u + v);
        let h = 0.5 * (v - u);
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = c + h * t;
            visit(x, (w * h).ln() + g.at(x) - gmax);
        }
    }
    (gmax, argmax)
}

pub(crate) fn quadrature(p: f64, l: f64, lo: f64, hi: f64) -> SlabMoments {
    let g = Exponent { p, l };
    let (_, anchor) = g.max_on(lo, hi);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let (gmax, _) = for_each_node(g, lo, hi, |x, lw| {
        let w = lw.exp();
        let d = x - anchor;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
    });
    let mean_offset = s1 / s0;
    SlabMoments {
        ln_mass: gmax + s0.ln(),
        mean: anchor + mean_offset,
        var: (s2 / s0 - mean_offset * mean_offset).max(0.0),
    }
}

/// Draws from the density proportional to `exp(-P x²/2 + L x)` on `[lo, hi]`
/// by inverting its distribution function.
pub(crate) fn sample_truncated<R: Rng + ?Sized>(p: f64, l: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if p > EPS_PREC {
        invert_gaussian(p, l, lo, hi, u)
    } else {
        invert_by_quadrature(p, l, lo, hi, u)
    }
}

fn invert_gaussian(p: f64, l: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let sp = p.sqrt();
    let m = l / p;
    let a = (lo - m) * sp;
    let b = (hi - m) * sp;
    if a.abs() > b.abs() {
        return -invert_gaussian(p, -l, -hi, -lo, 1.0 - u);
    }
    let s = 1.0 / sp;
    let t = if a >= 0.0 {
        // upper tail: Q(t) = Q(a) - u (Q(a) - Q(b))
        let qa = ln_norm_sf(a);
        let ratio = (ln_norm_sf(b) - qa).exp();
        let target = qa + (-u * (1.0 - ratio)).ln_1p();
        solve_ln_sf(target, a, b)
    } else {
        let cdf_a = (ln_norm_sf(-a)).exp();
        let sf_a = (ln_norm_sf(a)).exp();
        let sf_b = (ln_norm_sf(b)).exp();
        let cdf_b = (ln_norm_sf(-b)).exp();
        let target_cdf = cdf_a + u * (cdf_b - cdf_a);
        if target_cdf <= 0.5 {
            -solve_ln_sf(target_cdf.ln(), -b, -a)
        } else {
            let target_sf = (1.0 - u) * sf_a + u * sf_b;
            solve_ln_sf(target_sf.ln(), a, b)
        }
    };
    let x = if a >= 0.0 { lo + s * (t - a) } else { m + s * t };
    x.clamp(lo, hi)
}

/// Finds `t ∈ [lo, hi]` with `ln Q(t) = target` by safeguarded Newton.
fn solve_ln_sf(target: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let mut t = lo;
    for _ in 0..200 {
        let f = ln_norm_sf(t) - target;
        if f.abs() < 1e-15 * target.abs().max(1.0) {
            return t;
        }
        // ln Q is decreasing
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = -inv_mills(t);
        let mut next = t - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

fn invert_by_quadrature(p: f64, l: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let total = quadrature(p, l, lo, hi).ln_mass;
    let target = u.ln() + total;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..64 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if quadrature(p, l, lo, mid).ln_mass < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
