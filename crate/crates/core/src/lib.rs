//! Numerical laboratory for abstract stochastic 2D hydrodynamical-type
//! systems: an abstract model interface with a randomized hypothesis
//! verifier, concrete shell / spectral Navier-Stokes / Ornstein-Uhlenbeck
//! models, trace-class Q-Wiener sampling with Cameron-Martin controls,
//! semi-implicit Euler-Maruyama solvers for the small-noise equation family,
//! and the small-noise asymptotics experiments (central limit coupling,
//! moderate-deviation tails, variational rate function).

// negated range checks reject NaN as well as out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::field_reassign_with_default)]

pub mod asymptotics;
pub mod error;
pub mod integrators;
pub mod model;
pub mod models;
pub mod rng;
pub mod state;
pub mod stats;
pub mod stochastics;
#[doc(hidden)]
pub mod testutil;
pub mod verify;

pub use error::{Error, Result};
pub use model::{HypothesisConstants, InterpNorm, ModelSpec};
pub use state::{NormTriple, StateVector};
pub use stochastics::{CovarianceSpec, TimeGrid};
