//! Exact RBM marginals by summing over every hidden configuration.

use crate::quad::{tilted_unit, Unit};

#[derive(Debug, Clone)]
pub struct Marginals {
    pub visible_mean: Vec<f64>,
    pub visible_var: Vec<f64>,
    pub hidden_mean: Vec<f64>,
    pub hidden_var: Vec<f64>,
}

/// Marginals of `P(x, h) ∝ exp(xᵀWh) Π P0(x_i) e^{-A_i x_i²/2 + B_i x_i} Π e^{bias_μ h_μ}`
/// for binary hidden units. Conditioned on `h`, the visibles factorize, so
/// each hidden state contributes a product of one-dimensional tilted
/// integrals.
///
/// `w` is indexed `w[i][mu]`.
pub fn enumerate_marginals(
    w: &[Vec<f64>],
    visible: &[Unit],
    hidden_bias: &[f64],
    ext_a: &[f64],
    ext_b: &[f64],
) -> Marginals {
    let n = visible.len();
    let h = hidden_bias.len();
    assert!(h <= 16, "enumeration over 2^{h} states is too large");
    let states = 1usize << h;
    let mut log_w = Vec::with_capacity(states);
    let mut v_means = Vec::with_capacity(states);
    let mut v_second = Vec::with_capacity(states);
    for s in 0..states {
        let hs: Vec<f64> = (0..h).map(|mu| ((s >> mu) & 1) as f64).collect();
        let mut lw: f64 = hs.iter().zip(hidden_bias).map(|(x, b)| x * b).sum();
        let mut means = vec![0.0; n];
        let mut second = vec![0.0; n];
        for i in 0..n {
            let field: f64 = (0..h).map(|mu| w[i][mu] * hs[mu]).sum();
            let t = tilted_unit(visible[i], ext_a[i], ext_b[i] + field);
            lw += t.ln_z;
            means[i] = t.mean;
            second[i] = t.var + t.mean * t.mean;
        }
        log_w.push(lw);
        v_means.push(means);
        v_second.push(second);
    }
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();

    let mut visible_mean = vec![0.0; n];
    let mut visible_second = vec![0.0; n];
    let mut hidden_mean = vec![0.0; h];
    for s in 0..states {
        let p = weights[s] / total;
        for i in 0..n {
            visible_mean[i] += p * v_means[s][i];
            visible_second[i] += p * v_second[s][i];
        }
        for (mu, hm) in hidden_mean.iter_mut().enumerate() {
            if (s >> mu) & 1 == 1 {
                *hm += p;
            }
        }
    }
    let visible_var = visible_second
        .iter()
        .zip(&visible_mean)
        .map(|(s, m)| s - m * m)
        .collect();
    let hidden_var = hidden_mean.iter().map(|m| m * (1.0 - m)).collect();
    Marginals {
        visible_mean,
        visible_var,
        hidden_mean,
        hidden_var,
    }
}
