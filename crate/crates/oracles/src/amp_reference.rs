//! Scalar-loop transcription of one AMP step on the AWGN channel.

/// Returns `(V, omega)` given the current estimates and the previous
/// channel quantities.
pub fn channel(
    f: &[Vec<f64>],
    y: &[f64],
    delta: f64,
    a: &[f64],
    c: &[f64],
    v_prev: &[f64],
    omega_prev: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let m = f.len();
    let mut v = vec![0.0; m];
    let mut omega = vec![0.0; m];
    for mu in 0..m {
        let mut vs = 0.0;
        let mut fa = 0.0;
        for i in 0..a.len() {
            vs += f[mu][i] * f[mu][i] * c[i];
            fa += f[mu][i] * a[i];
        }
        v[mu] = vs;
        omega[mu] = fa - vs * (y[mu] - omega_prev[mu]) / (delta + v_prev[mu]);
    }
    (v, omega)
}

/// Returns `(A, B)` given the channel quantities of the same iteration.
pub fn field(
    f: &[Vec<f64>],
    y: &[f64],
    delta: f64,
    a: &[f64],
    v: &[f64],
    omega: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut big_a = vec![0.0; n];
    let mut big_b = vec![0.0; n];
    for i in 0..n {
        let mut s_a = 0.0;
        let mut s_b = 0.0;
        for mu in 0..f.len() {
            s_a += f[mu][i] * f[mu][i] / (delta + v[mu]);
            s_b += f[mu][i] * (y[mu] - omega[mu]) / (delta + v[mu]);
        }
        big_a[i] = s_a;
        big_b[i] = s_a * a[i] + s_b;
    }
    (big_a, big_b)
}
