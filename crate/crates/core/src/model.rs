//! The abstract model interface: diagonal operator A, bilinear term B,
//! reaction and its derivative, noise coefficient, interpolation norm and
//! the declared hypothesis constants.
//!
//! A `ModelSpec` is immutable after construction and shareable across
//! threads; every evaluator is a pure function of its arguments.

use crate::error::{Error, Result};
use crate::state::{self, NormTriple, StateVector};
use serde::{Deserialize, Serialize};

pub type BilinearFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type ReactionFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
/// (t, u, w) -> R'(t, u) w
pub type ReactionDerivFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
/// (t, u, w) -> sigma(t, u) w, with w a full-dimension vector in H.
pub type NoiseFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Declared nominal values of the hypothesis constants. Field names follow
/// the roles: `a0` for the interpolation inequality, `k0`/`k1` for noise
/// growth, `l1` for noise Lipschitz, `r0`/`r1` for the reaction bounds,
/// `r_prime0`/`r_prime1` for the derivative growth (with `r_prime0` doubling
/// as the Lipschitz slope of the derivative in the state), and
/// `kappa`/`holder_c` for the time regularity of the noise coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub a0: f64,
    pub k0: f64,
    pub k1: f64,
    pub l1: f64,
    pub r0: f64,
    pub r1: f64,
    pub r_prime0: f64,
    pub r_prime1: f64,
    pub kappa: f64,
    pub holder_c: f64,
}

impl Default for HypothesisConstants {
    fn default() -> Self {
        HypothesisConstants {
            a0: 1.0,
            k0: 1.0,
            k1: 1.0,
            l1: 1.0,
            r0: 1.0,
            r1: 1.0,
            r_prime0: 1.0,
            r_prime1: 1.0,
            kappa: 1.0,
            holder_c: 1.0,
        }
    }
}

impl HypothesisConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a0", self.a0),
            ("k0", self.k0),
            ("k1", self.k1),
            ("l1", self.l1),
            ("r0", self.r0),
            ("r1", self.r1),
            ("r_prime0", self.r_prime0),
            ("r_prime1", self.r_prime1),
            ("kappa", self.kappa),
            ("holder_c", self.holder_c),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "hypothesis constant {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Choice of interpolation norm.
pub enum InterpNorm {
    /// ||v||_H = (|v| ||v||)^{1/2}; saturates the interpolation inequality
    /// with constant exactly 1.
    GeometricMean,
    Custom(Box<NormFn>),
}

pub struct ModelSpec {
    name: String,
    dimension: usize,
    a_spectrum: Vec<f64>,
    bilinear: Box<BilinearFn>,
    reaction: Box<ReactionFn>,
    reaction_derivative: Box<ReactionDerivFn>,
    noise_coefficient: Box<NoiseFn>,
    interp_norm: InterpNorm,
    constants: HypothesisConstants,
    /// True when B is identically zero; lets solvers skip the evaluation.
    bilinear_is_zero: bool,
}

impl ModelSpec {
    pub fn builder(name: impl Into<String>, a_spectrum: Vec<f64>) -> ModelBuilder {
        ModelBuilder {
            name: name.into(),
            a_spectrum,
            bilinear: None,
            reaction: None,
            reaction_derivative: None,
            noise_coefficient: None,
            interp_norm: InterpNorm::GeometricMean,
            constants: HypothesisConstants::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn a_spectrum(&self) -> &[f64] {
        &self.a_spectrum
    }

    pub fn constants(&self) -> &HypothesisConstants {
        &self.constants
    }

    pub fn min_alpha(&self) -> f64 {
        self.a_spectrum
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bilinear_is_zero(&self) -> bool {
        self.bilinear_is_zero
    }

    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.bilinear)(u, v)
    }

    pub fn reaction(&self, t: f64, u: &[f64]) -> Vec<f64> {
        (self.reaction)(t, u)
    }

    pub fn reaction_derivative(&self, t: f64, u: &[f64], w: &[f64]) -> Vec<f64> {
        (self.reaction_derivative)(t, u, w)
    }

    pub fn sigma(&self, t: f64, u: &[f64], w: &[f64]) -> Vec<f64> {
        (self.noise_coefficient)(t, u, w)
    }

    pub fn h_norm(&self, v: &[f64]) -> f64 {
        state::h_norm(v)
    }

    pub fn v_norm(&self, v: &[f64]) -> f64 {
        state::v_norm(&self.a_spectrum, v)
    }

    pub fn interp_norm(&self, v: &[f64]) -> f64 {
        match &self.interp_norm {
            InterpNorm::GeometricMean => (self.h_norm(v) * self.v_norm(v)).sqrt(),
            InterpNorm::Custom(f) => f(v),
        }
    }

    /// The (|v|, ||v||, ||v||_H) triple; errors on a dimension mismatch.
    pub fn norms(&self, v: &StateVector) -> Result<NormTriple> {
        self.check_dimension(v.as_slice())?;
        Ok(NormTriple {
            h_norm: self.h_norm(v.as_slice()),
            v_norm: self.v_norm(v.as_slice()),
            interp: self.interp_norm(v.as_slice()),
        })
    }

    pub fn check_dimension(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("constants", &self.constants)
            .finish()
    }
}

pub struct ModelBuilder {
    name: String,
    a_spectrum: Vec<f64>,
    bilinear: Option<Box<BilinearFn>>,
    reaction: Option<Box<ReactionFn>>,
    reaction_derivative: Option<Box<ReactionDerivFn>>,
    noise_coefficient: Option<Box<NoiseFn>>,
    interp_norm: InterpNorm,
    constants: HypothesisConstants,
}

impl ModelBuilder {
    pub fn bilinear(mut self, f: Box<BilinearFn>) -> Self {
        self.bilinear = Some(f);
        self
    }

    pub fn reaction(mut self, f: Box<ReactionFn>) -> Self {
        self.reaction = Some(f);
        self
    }

    pub fn reaction_derivative(mut self, f: Box<ReactionDerivFn>) -> Self {
        self.reaction_derivative = Some(f);
        self
    }

    pub fn noise_coefficient(mut self, f: Box<NoiseFn>) -> Self {
        self.noise_coefficient = Some(f);
        self
    }

    pub fn interp_norm(mut self, norm: InterpNorm) -> Self {
        self.interp_norm = norm;
        self
    }

    pub fn constants(mut self, c: HypothesisConstants) -> Self {
        self.constants = c;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        let n = self.a_spectrum.len();
        if n == 0 {
            return Err(Error::invalid("model dimension must be positive"));
        }
        for (i, a) in self.a_spectrum.iter().enumerate() {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!(
                    "a_spectrum[{i}] must be strictly positive, got {a}"
                )));
            }
        }
        self.constants.validate()?;
        let bilinear_is_zero = self.bilinear.is_none();
        let zero_state = move |n: usize| vec![0.0; n];
        Ok(ModelSpec {
            name: self.name,
            dimension: n,
            a_spectrum: self.a_spectrum,
            bilinear: self
                .bilinear
                .unwrap_or_else(|| Box::new(move |u, _| zero_state(u.len()))),
            reaction: self
                .reaction
                .unwrap_or_else(|| Box::new(|_, u| vec![0.0; u.len()])),
            reaction_derivative: self
                .reaction_derivative
                .unwrap_or_else(|| Box::new(|_, _, w| vec![0.0; w.len()])),
            noise_coefficient: self
                .noise_coefficient
                .unwrap_or_else(|| Box::new(|_, _, w| vec![0.0; w.len()])),
            interp_norm: self.interp_norm,
            constants: self.constants,
            bilinear_is_zero,
        })
    }
}
