//! A real-valued shell model of turbulence.
//!
//! Shells carry geometric wavenumbers k_m = k0 * ratio^m and the dissipation
//! spectrum alpha_m = nu * k_m^2. The trilinear interaction couples nearest
//! and next-nearest shells; the six monomial patterns carry coefficients
//! tied to (a, b, c) so that the quadratic form (B(u,v), v) collapses to a
//! multiple of (a + b + c). With a + b + c = 0 the full antisymmetry
//! (B(u1,u2), u3) = -(B(u1,u3), u2) holds exactly, truncation included,
//! because out-of-range monomials vanish in matched pairs.
//!
//! The default noise coefficient is diagonal multiplicative with saturating
//! per-shell entries g_m (floor + gain * tanh(u_m)) and an optional
//! (1 + sin t)/2 time modulation, so growth, Lipschitz and time-Hoelder
//! constants are explicit. The default reaction is linear damping; a
//! cubic-saturating variant exercises the genuinely nonlinear derivative
//! bounds.

use crate::error::{Error, Result};
use crate::model::{HypothesisConstants, InterpNorm, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShellReaction {
    Zero,
    /// R(t, u) = rho * u.
    Damping {
        rho: f64,
    },
    /// R(t, u)_i = rho u_i + beta u_i^3 / (1 + u_i^2); globally Lipschitz
    /// with a state-dependent derivative.
    CubicSaturating {
        rho: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShellNoise {
    Zero,
    /// sigma(t, u) e_m = g_m (floor + gain * tanh(u_m)) theta(t) e_m with
    /// theta(t) = (1 + sin t)/2 when time-modulated, else 1.
    Multiplicative {
        floor: f64,
        gain: f64,
        time_modulated: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellParams {
    pub n_shells: usize,
    pub k0: f64,
    pub shell_ratio: f64,
    pub viscosity: f64,
    pub coeff_a: f64,
    pub coeff_b: f64,
    pub coeff_c: f64,
    /// Per-shell noise gains g_m >= 0; empty means g_m = 2^{-m/2}.
    #[serde(default)]
    pub noise_gains: Vec<f64>,
    pub reaction: ShellReaction,
    pub noise: ShellNoise,
}

impl Default for ShellParams {
    fn default() -> Self {
        ShellParams {
            n_shells: 10,
            k0: 1.0,
            shell_ratio: 2.0,
            viscosity: 1.0,
            coeff_a: 1.0,
            coeff_b: -0.5,
            coeff_c: -0.5,
            noise_gains: Vec::new(),
            reaction: ShellReaction::Damping { rho: 0.1 },
            noise: ShellNoise::Multiplicative {
                floor: 0.5,
                gain: 0.5,
                time_modulated: true,
            },
        }
    }
}

impl ShellParams {
    pub fn gains(&self) -> Vec<f64> {
        if self.noise_gains.is_empty() {
            (0..self.n_shells)
                .map(|m| 0.5_f64.powf(m as f64 / 2.0))
                .collect()
        } else {
            self.noise_gains.clone()
        }
    }
}

/// Raw trilinear evaluator with no constraint on (a, b, c); exposed so tests
/// can probe deliberately broken coefficient triples.
pub fn shell_bilinear_raw(
    wavenumbers: &[f64],
    ratio: f64,
    a: f64,
    b: f64,
    c: f64,
    u: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let n = wavenumbers.len();
    // pattern coefficients tied so each quadratic-form monomial class sums
    // to a multiple of (a + b + c)
    let a1 = a;
    let a2 = a + c;
    let b1 = a + b;
    let b2 = b / ratio;
    let c1 = (b + c) / (ratio * ratio);
    let c2 = c / ratio;
    let get = |x: &[f64], i: isize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            x[i as usize]
        }
    };
    let mut out = vec![0.0; n];
    for m in 0..n as isize {
        let k = wavenumbers[m as usize];
        out[m as usize] = k
            * (a1 * get(u, m + 1) * get(v, m + 2)
                + a2 * get(u, m + 2) * get(v, m + 1)
                + b1 * get(u, m - 1) * get(v, m + 1)
                + b2 * get(u, m + 1) * get(v, m - 1)
                + c1 * get(u, m - 1) * get(v, m - 2)
                + c2 * get(u, m - 2) * get(v, m - 1));
    }
    out
}

pub fn shell_wavenumbers(p: &ShellParams) -> Vec<f64> {
    (0..p.n_shells)
        .map(|m| p.k0 * p.shell_ratio.powi(m as i32))
        .collect()
}

fn cubic_sat(x: f64) -> f64 {
    x * x * x / (1.0 + x * x)
}

fn cubic_sat_deriv(x: f64) -> f64 {
    let x2 = x * x;
    (x2 * x2 + 3.0 * x2) / ((1.0 + x2) * (1.0 + x2))
}

fn theta(t: f64, modulated: bool) -> f64 {
    if modulated {
        0.5 * (1.0 + t.sin())
    } else {
        1.0
    }
}

/// Builds the shell ModelSpec; errors unless a + b + c = 0 (to round-off).
pub fn make_shell_model(p: &ShellParams) -> Result<ModelSpec> {
    if p.n_shells == 0 {
        return Err(Error::invalid("n_shells must be positive"));
    }
    if !(p.k0 > 0.0) {
        return Err(Error::invalid("k0 must be positive"));
    }
    if !(p.shell_ratio > 1.0) {
        return Err(Error::invalid("shell_ratio must exceed 1"));
    }
    if !(p.viscosity > 0.0) {
        return Err(Error::invalid("viscosity must be positive"));
    }
    let coeff_scale = p.coeff_a.abs() + p.coeff_b.abs() + p.coeff_c.abs();
    if (p.coeff_a + p.coeff_b + p.coeff_c).abs() > 1e-12 * (1.0 + coeff_scale) {
        return Err(Error::invalid(format!(
            "shell coefficients must satisfy a + b + c = 0, got {}",
            p.coeff_a + p.coeff_b + p.coeff_c
        )));
    }
    let gains = p.gains();
    if gains.len() != p.n_shells {
        return Err(Error::invalid(format!(
            "need {} noise gains, got {}",
            p.n_shells,
            gains.len()
        )));
    }
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::invalid("noise gains must be nonnegative"));
    }

    let k = shell_wavenumbers(p);
    let alpha: Vec<f64> = k.iter().map(|km| p.viscosity * km * km).collect();

    let (ratio, a, b, c) = (p.shell_ratio, p.coeff_a, p.coeff_b, p.coeff_c);
    let k_for_b = k.clone();
    let bilinear =
        Box::new(move |u: &[f64], v: &[f64]| shell_bilinear_raw(&k_for_b, ratio, a, b, c, u, v));

    let reaction_spec = p.reaction.clone();
    let reaction = {
        let spec = reaction_spec.clone();
        Box::new(move |_t: f64, u: &[f64]| match &spec {
            ShellReaction::Zero => vec![0.0; u.len()],
            ShellReaction::Damping { rho } => u.iter().map(|x| rho * x).collect(),
            ShellReaction::CubicSaturating { rho, beta } => {
                u.iter().map(|x| rho * x + beta * cubic_sat(*x)).collect()
            }
        })
    };
    let reaction_derivative = {
        let spec = reaction_spec.clone();
        Box::new(move |_t: f64, u: &[f64], w: &[f64]| match &spec {
            ShellReaction::Zero => vec![0.0; w.len()],
            ShellReaction::Damping { rho } => w.iter().map(|x| rho * x).collect(),
            ShellReaction::CubicSaturating { rho, beta } => u
                .iter()
                .zip(w)
                .map(|(x, wi)| (rho + beta * cubic_sat_deriv(*x)) * wi)
                .collect(),
        })
    };

    let noise_spec = p.noise.clone();
    let gains_for_sigma = gains.clone();
    let noise_coefficient = Box::new(move |t: f64, u: &[f64], w: &[f64]| match &noise_spec {
        ShellNoise::Zero => vec![0.0; w.len()],
        ShellNoise::Multiplicative {
            floor,
            gain,
            time_modulated,
        } => {
            let th = theta(t, *time_modulated);
            w.iter()
                .enumerate()
                .map(|(m, wm)| {
                    let g = gains_for_sigma.get(m).copied().unwrap_or(0.0);
                    g * (floor + gain * u[m].tanh()) * th * wm
                })
                .collect()
        }
    });

    let constants = shell_constants(p, &gains);
    ModelSpec::builder("shell", alpha)
        .bilinear(bilinear)
        .reaction(reaction)
        .reaction_derivative(reaction_derivative)
        .noise_coefficient(noise_coefficient)
        .interp_norm(InterpNorm::GeometricMean)
        .constants(constants)
        .build()
}

/// Declared constants for the shell construction. Noise bounds assume the
/// paired covariance has sup_j q_j <= 1, true for the default q_j = j^{-2}.
fn shell_constants(p: &ShellParams, gains: &[f64]) -> HypothesisConstants {
    const TINY: f64 = 1e-6;
    let sum_g2: f64 = gains.iter().map(|g| g * g).sum();
    let max_g2: f64 = gains.iter().map(|g| g * g).fold(0.0, f64::max);
    let (k0, l1, holder_c) = match &p.noise {
        ShellNoise::Zero => (TINY, TINY, TINY),
        ShellNoise::Multiplicative { floor, gain, .. } => {
            let amp = floor.abs() + gain.abs();
            (
                (sum_g2 * amp * amp).max(TINY),
                (max_g2 * gain * gain).max(TINY),
                // theta is 1/2-Lipschitz in t
                (0.5 * amp * sum_g2.sqrt()).max(TINY),
            )
        }
    };
    let (r0, r1, r_prime0, r_prime1) = match &p.reaction {
        ShellReaction::Zero => (TINY, TINY, TINY, TINY),
        ShellReaction::Damping { rho } => (TINY, rho.max(TINY), TINY, rho.max(TINY)),
        ShellReaction::CubicSaturating { rho, beta } => (
            TINY,
            // sup |d/dx cubic_sat| = 9/8 at x^2 = 3
            (rho + 1.125 * beta).max(TINY),
            // sup |d/dx cubic_sat_deriv| < 1.5
            (1.5 * beta).max(TINY),
            (rho + 1.125 * beta).max(TINY),
        ),
    };
    HypothesisConstants {
        a0: 1.0,
        k0,
        k1: TINY,
        l1,
        r0,
        r1,
        r_prime0,
        r_prime1,
        kappa: 1.0,
        holder_c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::dot;
    use crate::verify;

    #[test]
    fn construction_rejects_bad_params() {
        let mut p = ShellParams::default();
        p.coeff_c = 0.0; // a + b + c = 0.5
        assert!(make_shell_model(&p).is_err());
        let mut p = ShellParams::default();
        p.shell_ratio = 1.0;
        assert!(make_shell_model(&p).is_err());
        let mut p = ShellParams::default();
        p.viscosity = 0.0;
        assert!(make_shell_model(&p).is_err());
    }

    #[test]
    fn two_shells_have_no_complete_triad() {
        let mut p = ShellParams::default();
        p.n_shells = 2;
        let m = make_shell_model(&p).unwrap();
        let u = [1.3, -0.7];
        let v = [0.4, 2.2];
        assert_eq!(m.bilinear(&u, &v), vec![0.0, 0.0]);
    }

    #[test]
    fn sixteen_shell_antisymmetry_passes_at_1e12() {
        let mut p = ShellParams::default();
        p.n_shells = 16;
        let m = make_shell_model(&p).unwrap();
        let rep = verify::verify_antisymmetry(&m, 1000, 42, 1e-12).unwrap();
        assert!(rep.passed(), "{:?}", rep.records);
    }

    #[test]
    fn broken_coefficients_fail_antisymmetry() {
        // bypass the constructor with a + b + c != 0 and check the residual
        // against the dense-tensor oracle
        let p = ShellParams::default();
        let k = shell_wavenumbers(&p);
        let (a, b, c) = (1.0, -0.5, 0.0); // sum = 0.5
        let n = p.n_shells;
        let u1 = crate::testutil::gaussian_vec(n, 21, 0);
        let u2 = crate::testutil::gaussian_vec(n, 21, 100);
        let u3 = crate::testutil::gaussian_vec(n, 21, 200);
        let b12 = shell_bilinear_raw(&k, p.shell_ratio, a, b, c, &u1, &u2);
        let b13 = shell_bilinear_raw(&k, p.shell_ratio, a, b, c, &u1, &u3);
        let defect = dot(&b12, &u3) + dot(&b13, &u2);
        let oracle =
            crate::testutil::shell_trilinear_oracle(&k, p.shell_ratio, a, b, c, &u1, &u2, &u3)
                + crate::testutil::shell_trilinear_oracle(
                    &k,
                    p.shell_ratio,
                    a,
                    b,
                    c,
                    &u1,
                    &u3,
                    &u2,
                );
        assert!(defect.abs() > 1e-3, "defect should be visibly nonzero");
        assert!((defect - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()));
    }

    #[test]
    fn bilinear_constant_is_stable_across_seeds() {
        let m = make_shell_model(&ShellParams::default()).unwrap();
        let a = verify::verify_bilinear_bound(&m, &[0.25], 10_000, 1, 1.1).unwrap();
        let b = verify::verify_bilinear_bound(&m, &[0.25], 10_000, 2, 1.1).unwrap();
        let c_a = a.records[0].empirical_constant;
        let c_b = b.records[0].empirical_constant;
        assert!(c_a > 0.0 && c_b > 0.0);
        let ratio = c_a / c_b;
        assert!(
            (0.8..=1.25).contains(&ratio),
            "seed stability ratio {ratio}"
        );
    }

    #[test]
    fn noise_and_reaction_constants_hold() {
        let m = make_shell_model(&ShellParams::default()).unwrap();
        let cov = crate::stochastics::CovarianceSpec::power_law(10, 2.0);
        let rep = verify::verify_noise_and_reaction(&m, &cov, 2000, 7, 1.1).unwrap();
        assert!(rep.passed(), "{:#?}", rep.records);
    }

    #[test]
    fn cubic_reaction_passes_derivative_checks() {
        let mut p = ShellParams::default();
        p.reaction = ShellReaction::CubicSaturating {
            rho: 0.1,
            beta: 0.2,
        };
        let m = make_shell_model(&p).unwrap();
        let cov = crate::stochastics::CovarianceSpec::power_law(10, 2.0);
        let rep = verify::verify_noise_and_reaction(&m, &cov, 1000, 8, 1.1).unwrap();
        assert!(rep.passed(), "{:#?}", rep.records);
    }
}
