//! Time-increment modulus of the controlled process: the expected shifted
//! square distance M_n = E int |X(psi_n(s)) - X(s)|^2 ds under the shift
//! psi_n(s) = (s + 2^{-n}) and T, restricted to replicas whose sup-norm and
//! energy stay inside a clip level.

use super::{admit_replicas, run_replicas};
use crate::error::{Error, Result};
use crate::integrators::{solve_controlled, solve_deterministic, ScalingSpec};
use crate::model::ModelSpec;
use crate::rng;
use crate::state::StateVector;
use crate::stats;
use crate::stochastics::{sample_increments, ControlPath, CovarianceSpec, TimeGrid};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ModulusConfig {
    pub eps: f64,
    pub a_exponent: f64,
    /// Shift exponents n; the shift is 2^{-n} and must resolve the grid.
    pub n_list: Vec<u32>,
    pub replicas: usize,
    pub base_seed: u64,
    /// Clip level M of the restriction set.
    pub clip: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusRow {
    pub n: u32,
    pub shift: f64,
    pub m_n: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusResult {
    pub rows: Vec<ModulusRow>,
    /// Fitted exponent of M_n against the shift 2^{-n}.
    pub fitted_exponent: Option<f64>,
    /// Replicas inside the clip set.
    pub included: usize,
    pub excluded: usize,
}

pub fn increment_modulus(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    grid: TimeGrid,
    phi: &ControlPath,
    cfg: &ModulusConfig,
) -> Result<ModulusResult> {
    if cfg.n_list.is_empty() {
        return Err(Error::invalid("n list must not be empty"));
    }
    if cfg.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n list must be strictly increasing"));
    }
    let dt = grid.dt();
    for n in &cfg.n_list {
        if 0.5_f64.powi(*n as i32) < dt {
            return Err(Error::invalid(format!(
                "shift 2^-{n} is below the grid resolution {dt}"
            )));
        }
    }
    if cfg.replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let scaling = ScalingSpec::mdp(cfg.eps, cfg.a_exponent)?;
    let u0 = solve_deterministic(model, xi, grid)?;

    // per replica: shifted square distances per n, or None outside the clip
    let per_replica = run_replicas(cfg.replicas, |r| {
        let inc = sample_increments(cov, grid, rng::replica_key(cfg.base_seed, r));
        let x = solve_controlled(model, cov, &u0, &scaling, &inc, phi)?;
        if x.sup_h_sq() > cfg.clip || x.int_v_sq(model) > cfg.clip {
            return Ok(None);
        }
        let steps = grid.steps();
        let mut row = Vec::with_capacity(cfg.n_list.len());
        for n in &cfg.n_list {
            let shift_steps = (0.5_f64.powi(*n as i32) / dt).round() as usize;
            let mut total = 0.0;
            for k in 0..steps {
                let j = (k + shift_steps).min(steps);
                let a = x.state(j);
                let b = x.state(k);
                let d: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                total += dt * d;
            }
            row.push(total);
        }
        Ok(Some(row))
    });
    let (rows, excluded) = admit_replicas(per_replica)?;
    let kept: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(Error::invalid(
            "too few replicas inside the clip set; raise the clip level",
        ));
    }

    let mut out_rows = Vec::with_capacity(cfg.n_list.len());
    for (i, n) in cfg.n_list.iter().enumerate() {
        let samples: Vec<f64> = kept.iter().map(|row| row[i]).collect();
        let (m_n, se) = stats::mean_se(&samples);
        out_rows.push(ModulusRow {
            n: *n,
            shift: 0.5_f64.powi(*n as i32),
            m_n,
            se,
        });
    }
    let shifts: Vec<f64> = out_rows.iter().map(|r| r.shift).collect();
    let values: Vec<f64> = out_rows.iter().map(|r| r.m_n).collect();
    let fitted_exponent = stats::log_log_slope(&shifts, &values);
    Ok(ModulusResult {
        rows: out_rows,
        fitted_exponent,
        included: kept.len(),
        excluded,
    })
}
