//! The experiments confronting the limit theorems with simulation: coupled
//! CLT distances, moderate-deviation tail estimates with exponential
//! tilting, the variational rate function, controlled-process convergence,
//! the time-increment modulus and moment audits.
//!
//! Replicas are embarrassingly parallel with per-replica counter keys;
//! reductions walk the replica-ordered results with fixed-order pairwise
//! summation, so every statistic is independent of the worker count.

pub mod clt;
pub mod controlled;
pub mod mdp;
pub mod modulus;
pub mod moments;
pub mod rate;

pub use clt::{clt_experiment, CltConfig, CltResult};
pub use controlled::{controlled_convergence, ControlledConfig, ControlledResult};
pub use mdp::{mdp_tail_experiment, TailConfig, TailEstimate, TailResult};
pub use modulus::{increment_modulus, ModulusConfig, ModulusResult, ModulusRow};
pub use moments::{moment_audit, MomentReport};
pub use rate::{rate_function, RateConfig, RateOperator, RateSolution};

use crate::error::{Error, Result};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;

/// Replica-exclusion cap: beyond this the grid, not the statistic, is at
/// fault and the experiment fails.
pub const MAX_EXCLUDED_PERCENT: f64 = 1.0;

/// Per-epsilon error statistics of a coupled distance.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorStatistic {
    pub eps: f64,
    pub replicas: usize,
    pub excluded: usize,
    pub mean_sup_sq: f64,
    pub se_sup_sq: f64,
    pub mean_int_v_sq: f64,
    pub se_int_v_sq: f64,
    /// D = mean of (sup |.|^2 + int ||.||^2 dt).
    pub combined: f64,
    pub combined_se: f64,
}

impl ErrorStatistic {
    pub(crate) fn from_samples(
        eps: f64,
        sup_sq: &[f64],
        int_v_sq: &[f64],
        excluded: usize,
    ) -> ErrorStatistic {
        let (mean_sup_sq, se_sup_sq) = stats::mean_se(sup_sq);
        let (mean_int_v_sq, se_int_v_sq) = stats::mean_se(int_v_sq);
        let combined_samples: Vec<f64> = sup_sq.iter().zip(int_v_sq).map(|(a, b)| a + b).collect();
        let (combined, combined_se) = stats::mean_se(&combined_samples);
        ErrorStatistic {
            eps,
            replicas: sup_sq.len(),
            excluded,
            mean_sup_sq,
            se_sup_sq,
            mean_int_v_sq,
            se_int_v_sq,
            combined,
            combined_se,
        }
    }
}

/// Runs `f` over replica indices in parallel, preserving replica order.
pub(crate) fn run_replicas<T: Send>(
    replicas: usize,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Vec<Result<T>> {
    (0..replicas as u64).into_par_iter().map(f).collect()
}

/// Separates blow-up exclusions from hard errors and enforces the cap.
pub(crate) fn admit_replicas<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut kept = Vec::with_capacity(total);
    let mut excluded = 0usize;
    for r in results {
        match r {
            Ok(v) => kept.push(v),
            Err(Error::BlowUp { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if (excluded as f64) * 100.0 > MAX_EXCLUDED_PERCENT * total as f64 {
        return Err(Error::TooManyExclusions {
            excluded,
            total,
            limit_percent: MAX_EXCLUDED_PERCENT,
        });
    }
    Ok((kept, excluded))
}

pub(crate) fn validate_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::invalid("eps list must not be empty"));
    }
    for e in eps_list {
        if !(*e > 0.0 && *e <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {e}")));
        }
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps list must be strictly decreasing"));
    }
    Ok(())
}
