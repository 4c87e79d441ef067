//! Adaptive Gauss–Kronrod (7/15) quadrature and tilted unit moments.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// `breaks` are extra interior points where the integrand is known to be
/// sharply peaked; the interval is pre-split there and into `64` equal
/// pieces so narrow features cannot slip between Kronrod nodes.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts: Vec<f64> = (0..=64).map(|k| a + (b - a) * k as f64 / 64.0).collect();
    pts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut stack: Vec<(f64, f64, f64, f64)> = pts
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    let mut total = 0.0;
    let mut iterations = 0usize;
    while let Some((lo, hi, v, e)) = stack.pop() {
        iterations += 1;
        let local_tol = tol * (hi - lo) / (b - a);
        let floor = 50.0 * f64::EPSILON * v.abs();
        if e <= local_tol.max(floor).max(1e-300) || hi - lo < 1e-14 * (b - a) || iterations > 2_000_000 {
            total += v;
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        stack.push((lo, mid, v1, e1));
        stack.push((mid, hi, v2, e2));
    }
    total
}

/// `ln ∫ exp(logf(x)) dx` over `[a, b]`, with `peak` the location of the
/// maximum of `logf` (or any point near it).
pub fn log_integrate(logf: &dyn Fn(f64) -> f64, a: f64, b: f64, peak: f64) -> f64 {
    let shift = logf(peak.clamp(a, b)).max(logf(a)).max(logf(b));
    let f = |x: f64| (logf(x) - shift).exp();
    shift + integrate(&f, a, b, &[peak], 1e-15).ln()
}

/// Log-normalizer, mean and variance of a tilted scalar distribution.
#[derive(Debug, Clone, Copy)]
pub struct Tilted {
    pub ln_z: f64,
    pub mean: f64,
    pub var: f64,
}

/// Unit distributions, mirroring the library's prior families.
#[derive(Debug, Clone, Copy)]
pub enum Unit {
    /// States {0, 1} with unnormalized weights {1, e^bias}.
    Binary { bias: f64 },
    /// `(1 - rho) δ(x) + rho N(x; mu, var)`, slab optionally restricted to
    /// `[lo, hi]` and renormalized there.
    SpikeSlab {
        rho: f64,
        mu: f64,
        var: f64,
        bounds: Option<(f64, f64)>,
    },
}

/// Moments of `P0(x) exp(-a x²/2 + b x)` by enumeration (binary) or
/// adaptive quadrature (slab), combined with the spike by direct weighting.
pub fn tilted_unit(unit: Unit, a: f64, b: f64) -> Tilted {
    match unit {
        Unit::Binary { bias } => {
            let l1 = bias - 0.5 * a + b;
            let m = l1.max(0.0);
            let z0 = (-m).exp();
            let z1 = (l1 - m).exp();
            let p = z1 / (z0 + z1);
            Tilted {
                ln_z: m + (z0 + z1).ln(),
                mean: p,
                var: p * (1.0 - p),
            }
        }
        Unit::SpikeSlab { rho, mu, var, bounds } => {
            let slab_log = |x: f64| -(x - mu).powi(2) / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
            let tilted_log = |x: f64| slab_log(x) - 0.5 * a * x * x + b * x;
            let prec = 1.0 / var + a;
            let (lo, hi, prior_mass_log) = match bounds {
                Some((lo, hi)) => (lo, hi, log_integrate(&slab_log, lo, hi, mu)),
                None => {
                    assert!(prec > 0.0, "untruncated slab needs positive precision");
                    let m = (mu / var + b) / prec;
                    let s = 1.0 / prec.sqrt();
                    (m - 40.0 * s, m + 40.0 * s, 0.0)
                }
            };
            let peak = if prec > 0.0 {
                ((mu / var + b) / prec).clamp(lo, hi)
            } else {
                // convex exponent: maximum sits on a boundary
                if tilted_log(lo) > tilted_log(hi) { lo } else { hi }
            };
            let slab_ln = log_integrate(&tilted_log, lo, hi, peak) - prior_mass_log;
            let shift = tilted_log(peak).max(tilted_log(lo)).max(tilted_log(hi));
            let w = |x: f64| (tilted_log(x) - shift).exp();
            let z = integrate(&w, lo, hi, &[peak], 1e-15);
            let m1 = integrate(&|x| x * w(x), lo, hi, &[peak], 1e-15) / z;
            let v1 = integrate(&|x| (x - m1).powi(2) * w(x), lo, hi, &[peak], 1e-15) / z;

            let spike_ln = if rho < 1.0 { (1.0 - rho).ln() } else { f64::NEG_INFINITY };
            let slab_total = if rho > 0.0 { rho.ln() + slab_ln } else { f64::NEG_INFINITY };
            let top = spike_ln.max(slab_total);
            let ps = (spike_ln - top).exp();
            let pl = (slab_total - top).exp();
            let ln_z = top + (ps + pl).ln();
            let wl = pl / (ps + pl);
            let mean = wl * m1;
            let second = wl * (v1 + m1 * m1);
            Tilted {
                ln_z,
                mean,
                var: second - mean * mean,
            }
        }
    }
}
