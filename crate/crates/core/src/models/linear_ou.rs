//! Linear Ornstein-Uhlenbeck diagnostic model: B = 0, constant diagonal
//! noise, linear reaction. Every statistic has a closed form, so this model
//! anchors the asymptotics experiments to analytic oracles.

use crate::error::{Error, Result};
use crate::model::{HypothesisConstants, InterpNorm, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOuParams {
    /// Drift rates a_i > 0 (the A-spectrum).
    pub drift_rates: Vec<f64>,
    /// Constant diagonal noise amplitudes s_i.
    pub noise_amplitudes: Vec<f64>,
    /// Optional dense reaction matrix M (row-major n x n); empty means zero.
    #[serde(default)]
    pub reaction_matrix: Vec<f64>,
}

impl Default for LinearOuParams {
    fn default() -> Self {
        LinearOuParams {
            drift_rates: vec![1.0],
            noise_amplitudes: vec![1.0],
            reaction_matrix: Vec::new(),
        }
    }
}

pub fn make_linear_ou(p: &LinearOuParams) -> Result<ModelSpec> {
    let n = p.drift_rates.len();
    if n == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if p.noise_amplitudes.len() != n {
        return Err(Error::invalid(format!(
            "need {n} noise amplitudes, got {}",
            p.noise_amplitudes.len()
        )));
    }
    let matrix = if p.reaction_matrix.is_empty() {
        None
    } else {
        if p.reaction_matrix.len() != n * n {
            return Err(Error::invalid(format!("reaction matrix must be {n}x{n}")));
        }
        Some(p.reaction_matrix.clone())
    };

    let apply_matrix = move |m: &Option<Vec<f64>>, u: &[f64]| -> Vec<f64> {
        match m {
            None => vec![0.0; u.len()],
            Some(mat) => {
                let n = u.len();
                (0..n)
                    .map(|i| (0..n).map(|j| mat[i * n + j] * u[j]).sum())
                    .collect()
            }
        }
    };

    let m1 = matrix.clone();
    let reaction = Box::new(move |_t: f64, u: &[f64]| apply_matrix(&m1, u));
    let m2 = matrix.clone();
    let reaction_derivative = Box::new(move |_t: f64, _u: &[f64], w: &[f64]| apply_matrix(&m2, w));

    let amps = p.noise_amplitudes.clone();
    let noise_coefficient = Box::new(move |_t: f64, _u: &[f64], w: &[f64]| -> Vec<f64> {
        w.iter().zip(&amps).map(|(x, s)| s * x).collect()
    });

    let constants = ou_constants(p, matrix.as_deref());
    ModelSpec::builder("ou", p.drift_rates.clone())
        .reaction(reaction)
        .reaction_derivative(reaction_derivative)
        .noise_coefficient(noise_coefficient)
        .interp_norm(InterpNorm::GeometricMean)
        .constants(constants)
        .build()
}

fn ou_constants(p: &LinearOuParams, matrix: Option<&[f64]>) -> HypothesisConstants {
    const TINY: f64 = 1e-6;
    let sum_s2: f64 = p.noise_amplitudes.iter().map(|s| s * s).sum();
    // crude operator-norm bound for M: Frobenius norm
    let m_norm = matrix
        .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
        .unwrap_or(0.0);
    HypothesisConstants {
        a0: 1.0,
        k0: sum_s2.max(TINY),
        k1: TINY,
        l1: TINY,
        r0: TINY,
        r1: m_norm.max(TINY),
        r_prime0: TINY,
        r_prime1: m_norm.max(TINY),
        kappa: 1.0,
        holder_c: TINY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_dimensions() {
        let p = LinearOuParams {
            drift_rates: vec![1.0, 2.0],
            noise_amplitudes: vec![1.0],
            reaction_matrix: Vec::new(),
        };
        assert!(make_linear_ou(&p).is_err());
        assert!(make_linear_ou(&LinearOuParams::default()).is_ok());
    }

    #[test]
    fn bilinear_is_identically_zero() {
        let m = make_linear_ou(&LinearOuParams::default()).unwrap();
        assert!(m.bilinear_is_zero());
        assert_eq!(m.bilinear(&[1.0], &[2.0]), vec![0.0]);
    }

    #[test]
    fn reaction_matrix_applies() {
        let p = LinearOuParams {
            drift_rates: vec![1.0, 1.0],
            noise_amplitudes: vec![0.0, 0.0],
            reaction_matrix: vec![0.0, 1.0, -1.0, 0.0],
        };
        let m = make_linear_ou(&p).unwrap();
        assert_eq!(m.reaction(0.0, &[2.0, 3.0]), vec![3.0, -2.0]);
        assert_eq!(
            m.reaction_derivative(0.0, &[9.0, 9.0], &[2.0, 3.0]),
            vec![3.0, -2.0]
        );
    }
}
