//! Reconstruction quality measures.

use ndarray::ArrayView1;

/// Returned by [`mse_db`] when the estimate is exact.
pub const MSE_DB_FLOOR: f64 = -160.0;

/// `10 log10(|x - a|² / N)`, floored at [`MSE_DB_FLOOR`].
pub fn mse_db(x: ArrayView1<f64>, a: ArrayView1<f64>) -> f64 {
    assert_eq!(x.len(), a.len(), "mse_db needs equal lengths");
    let sq: f64 = x.iter().zip(a.iter()).map(|(x, a)| (x - a) * (x - a)).sum();
    if sq == 0.0 {
        return MSE_DB_FLOOR;
    }
    (10.0 * (sq / x.len() as f64).log10()).max(MSE_DB_FLOOR)
}

/// Correlation value plus a flag set when either input was constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    pub constant_input: bool,
}

/// Denominator convention for [`correlation_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    /// Pearson: centered inner product over `N σ_x σ_a`, in `[-1, 1]`.
    #[default]
    Pearson,
    /// Centered inner product over `σ_x σ_a` without the `1/N`.
    Unnormalized,
}

pub fn correlation(x: ArrayView1<f64>, a: ArrayView1<f64>) -> Correlation {
    correlation_with(x, a, CorrelationKind::Pearson)
}

/// Centered correlation of `x` and `a`; a constant input gives value 0
/// with `constant_input` set.
pub fn correlation_with(x: ArrayView1<f64>, a: ArrayView1<f64>, kind: CorrelationKind) -> Correlation {
    assert_eq!(x.len(), a.len(), "correlation needs equal lengths");
    let n = x.len() as f64;
    let xm = x.sum() / n;
    let am = a.sum() / n;
    let (mut sxa, mut sxx, mut saa) = (0.0, 0.0, 0.0);
    for (x, a) in x.iter().zip(a.iter()) {
        let (dx, da) = (x - xm, a - am);
        sxa += dx * da;
        sxx += dx * dx;
        saa += da * da;
    }
    if sxx == 0.0 || saa == 0.0 || n == 0.0 {
        return Correlation {
            value: 0.0,
            constant_input: true,
        };
    }
    let value = match kind {
        CorrelationKind::Pearson => (sxa / (sxx.sqrt() * saa.sqrt())).clamp(-1.0, 1.0),
        CorrelationKind::Unnormalized => sxa / ((sxx / n).sqrt() * (saa / n).sqrt()),
    };
    Correlation {
        value,
        constant_input: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn mse_examples() {
        let x = Array1::from_shape_fn(100, |i| if i == 0 { 1.0 } else { 0.0 });
        assert!((mse_db(x.view(), Array1::zeros(100).view()) + 20.0).abs() < 1e-12);
        assert_eq!(mse_db(x.view(), x.view()), MSE_DB_FLOOR);
    }

    #[test]
    fn correlation_examples() {
        let x = array![0.0, 1.0, 3.0, 2.0];
        assert!((correlation(x.view(), x.view()).value - 1.0).abs() < 1e-15);
        assert!((correlation(x.view(), (-&x).view()).value + 1.0).abs() < 1e-15);
        assert!((correlation(x.view(), (&x + 4.0).view()).value - 1.0).abs() < 1e-15);
        let c = correlation(x.view(), Array1::from_elem(4, 2.0).view());
        assert!(c.constant_input && c.value == 0.0);
    }

    #[test]
    fn unnormalized_variant_scales_by_length() {
        let x = array![0.0, 1.0, 3.0, 2.0];
        let c = correlation_with(x.view(), x.view(), CorrelationKind::Unnormalized);
        assert!((c.value - 4.0).abs() < 1e-12);
    }
}
