//! States of the truncated system and the three norms attached to them.
//!
//! A state is a finite coefficient vector in the model basis; after
//! truncation the phase space H is the n-dimensional coefficient space with
//! the plain Euclidean inner product. The V-norm is the A^{1/2}-weighted
//! norm and the interpolation norm is supplied by the model.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coefficient vector of one state. Complex models store real pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    /// Wraps a coefficient vector, rejecting non-finite entries.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient at {i}")));
        }
        Ok(StateVector(coeffs))
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The H, V and interpolation norms of one vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTriple {
    /// |v|: plain Euclidean norm on the coefficients.
    pub h_norm: f64,
    /// ||v|| = |A^{1/2} v| = (sum_i alpha_i v_i^2)^{1/2}.
    pub v_norm: f64,
    /// ||v||_H: the model-supplied interpolation norm.
    pub interp: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn h_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn v_norm(a_spectrum: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(a_spectrum.len(), v.len());
    a_spectrum
        .iter()
        .zip(v)
        .map(|(a, x)| a * x * x)
        .sum::<f64>()
        .sqrt()
}

/// y += c * x
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn scaled(x: &[f64], c: f64) -> Vec<f64> {
    x.iter().map(|v| c * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
