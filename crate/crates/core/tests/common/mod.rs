#![allow(dead_code)]

use num_complex::Complex64;

/// Lab-frame RK4 for
///   c' = -i V e^{-i delta t} b
///   b' = -(gamma/2) b - i V e^{i delta t} c
/// with c(0) = 1, b(0) = 0. Returns `(c, b)` at `t_k = k * dt`.
pub fn rk4_oracle(gamma: f64, v: f64, delta: f64, t_max: f64, dt: f64) -> Vec<(Complex64, Complex64)> {
    let i = Complex64::i();
    let f = |t: f64, c: Complex64, b: Complex64| {
        let dc = -i * v * (-i * delta * t).exp() * b;
        let db = -0.5 * gamma * b - i * v * (i * delta * t).exp() * c;
        (dc, db)
    };
    let n = (t_max / dt).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut c, mut b) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    out.push((c, b));
    for k in 0..n {
        let t = k as f64 * dt;
        let (k1c, k1b) = f(t, c, b);
        let (k2c, k2b) = f(t + dt / 2.0, c + k1c * (dt / 2.0), b + k1b * (dt / 2.0));
        let (k3c, k3b) = f(t + dt / 2.0, c + k2c * (dt / 2.0), b + k2b * (dt / 2.0));
        let (k4c, k4b) = f(t + dt, c + k3c * dt, b + k3b * dt);
        c += (k1c + 2.0 * k2c + 2.0 * k3c + k4c) * (dt / 6.0);
        b += (k1b + 2.0 * k2b + 2.0 * k3b + k4b) * (dt / 6.0);
        out.push((c, b));
    }
    out
}

/// O(N^2) transform `S_k = sum_m r_m e^{-2 pi i m k / N}`.
pub fn brute_dft(r: &[f64]) -> Vec<Complex64> {
    let n = r.len();
    (0..n)
        .map(|k| {
            r.iter()
                .enumerate()
                .map(|(m, &x)| {
                    let phase = -2.0 * std::f64::consts::PI * ((m * k) % n) as f64 / n as f64;
                    x * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

/// `A_k = sum_m r_m r_{(m + k) mod N}`.
pub fn circular_autocorrelation(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    (0..n).map(|k| (0..n).map(|m| r[m] * r[(m + k) % n]).sum()).collect()
}

/// Linear interpolation of samples taken every `dt` from zero.
pub fn interp(values: &[f64], dt: f64, t: f64) -> f64 {
    let x = (t / dt).clamp(0.0, (values.len() - 1) as f64);
    let k = (x.floor() as usize).min(values.len() - 2);
    let w = x - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}
