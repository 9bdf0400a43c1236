//! Independent oracles used by the test suites. Everything here reaches a
//! result by a different arithmetic route than the library code it checks
//! (dense tensors, explicit triple sums, closed forms), and nothing in the
//! library proper may call into it.

use crate::rng;

/// Plain Gaussian vector keyed like the verifier probes.
pub fn gaussian_vec(n: usize, key: u64, ctr_base: u64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    rng::fill_standard_normal(key, ctr_base, &mut v);
    v
}

/// Brute-force shell trilinear form (B(u, v), w) assembled as a dense
/// third-order tensor from the six monomial patterns, then contracted.
#[allow(clippy::too_many_arguments)]
pub fn shell_trilinear_oracle(
    wavenumbers: &[f64],
    ratio: f64,
    a: f64,
    b: f64,
    c: f64,
    u: &[f64],
    v: &[f64],
    w: &[f64],
) -> f64 {
    let n = wavenumbers.len();
    let mut tensor = vec![0.0; n * n * n]; // [w-index][u-index][v-index]
    let mut add = |m: isize, i: isize, j: isize, coeff: f64| {
        if m >= 0 && i >= 0 && j >= 0 && (m as usize) < n && (i as usize) < n && (j as usize) < n {
            tensor[(m as usize) * n * n + (i as usize) * n + j as usize] += coeff;
        }
    };
    let a1 = a;
    let a2 = a + c;
    let b1 = a + b;
    let b2 = b / ratio;
    let c1 = (b + c) / (ratio * ratio);
    let c2 = c / ratio;
    for m in 0..n as isize {
        let k = wavenumbers[m as usize];
        add(m, m + 1, m + 2, k * a1);
        add(m, m + 2, m + 1, k * a2);
        add(m, m - 1, m + 1, k * b1);
        add(m, m + 1, m - 1, k * b2);
        add(m, m - 1, m - 2, k * c1);
        add(m, m - 2, m - 1, k * c2);
    }
    let mut total = 0.0;
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                total += tensor[m * n * n + i * n + j] * w[m] * u[i] * v[j];
            }
        }
    }
    total
}

/// Direct convolution-sum oracle for the spectral model: the trilinear form
/// sum over p + q + r = 0 of i (u_hat(p) . q)(v_hat(q) . w_hat(r)), all
/// three wavevectors retained. Independent index arithmetic; no Leray step
/// because the pairing partner is divergence-free.
pub fn spectral_trilinear_oracle(
    max_wavenumber: i32,
    u_hat: &dyn Fn(i32, i32) -> [(f64, f64); 2],
    v_hat: &dyn Fn(i32, i32) -> [(f64, f64); 2],
    w_hat: &dyn Fn(i32, i32) -> [(f64, f64); 2],
) -> f64 {
    let k = max_wavenumber;
    let retained = |x: i32, y: i32| -> bool { (x != 0 || y != 0) && x.abs() <= k && y.abs() <= k };
    let mut total = 0.0;
    for px in -k..=k {
        for py in -k..=k {
            if !retained(px, py) {
                continue;
            }
            let up = u_hat(px, py);
            for qx in -k..=k {
                for qy in -k..=k {
                    if !retained(qx, qy) {
                        continue;
                    }
                    let (rx, ry) = (-(px + qx), -(py + qy));
                    if !retained(rx, ry) {
                        continue;
                    }
                    let vq = v_hat(qx, qy);
                    let wr = w_hat(rx, ry);
                    // s = u_hat(p) . q, complex
                    let s_re = up[0].0 * qx as f64 + up[1].0 * qy as f64;
                    let s_im = up[0].1 * qx as f64 + up[1].1 * qy as f64;
                    // t = v_hat(q) . w_hat(r), complex
                    let t_re = vq[0].0 * wr[0].0 - vq[0].1 * wr[0].1 + vq[1].0 * wr[1].0
                        - vq[1].1 * wr[1].1;
                    let t_im = vq[0].0 * wr[0].1
                        + vq[0].1 * wr[0].0
                        + vq[1].0 * wr[1].1
                        + vq[1].1 * wr[1].0;
                    // i * s * t, real part
                    total += -(s_re * t_im + s_im * t_re);
                }
            }
        }
    }
    total
}

/// Scalar Ornstein-Uhlenbeck closed forms: du = -a u dt + s sqrt(eps q) dW.
pub mod ou {
    /// Mean at time t from initial value xi.
    pub fn mean(a: f64, xi: f64, t: f64) -> f64 {
        xi * (-a * t).exp()
    }

    /// Variance at time t for noise amplitude s, covariance eigenvalue q and
    /// noise scale eps: eps q s^2 (1 - e^{-2at}) / (2a).
    pub fn variance(a: f64, s: f64, q: f64, eps: f64, t: f64) -> f64 {
        eps * q * s * s * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a)
    }

    /// Controllability Gramian int_0^T e^{-2a(T-r)} s^2 q dr; the terminal
    /// variance of the skeleton response to white-noise forcing.
    pub fn gramian(a: f64, s: f64, q: f64, t: f64) -> f64 {
        q * s * s * (1.0 - (-2.0 * a * t).exp()) / (2.0 * a)
    }
}
