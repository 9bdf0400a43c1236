//! Central-limit coupling: u^eps and the linearized process share one
//! Wiener path, the rescaled difference V^eps = (u^eps - u^0)/sqrt(eps) is
//! compared to V^0 in the sup-H and integrated-V metrics, and the
//! first-order distance of u^eps from u^0 is recorded alongside.

use super::{admit_replicas, run_replicas, validate_eps_list, ErrorStatistic};
use crate::error::{Error, Result};
use crate::integrators::{solve_deterministic, solve_linearized, solve_sde, ScalingSpec};
use crate::model::ModelSpec;
use crate::rng;
use crate::state::StateVector;
use crate::stats;
use crate::stochastics::{sample_increments, CovarianceSpec, TimeGrid};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CltConfig {
    pub eps_list: Vec<f64>,
    pub replicas: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltResult {
    /// Distance of V^eps from V^0, per eps.
    pub clt_stats: Vec<ErrorStatistic>,
    /// Distance of u^eps from u^0, per eps.
    pub first_order_stats: Vec<ErrorStatistic>,
    /// Fitted slope of log D(eps) vs log eps.
    pub clt_slope: Option<f64>,
    /// Fitted slope of the first-order distance vs eps.
    pub first_order_slope: Option<f64>,
    pub excluded: usize,
}

pub fn clt_experiment(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    grid: TimeGrid,
    cfg: &CltConfig,
) -> Result<CltResult> {
    validate_eps_list(&cfg.eps_list)?;
    if cfg.replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let u0 = solve_deterministic(model, xi, grid)?;

    // per replica and eps: (sup, int) for both metrics; same increments
    // couple every process within the replica and across the eps grid
    let per_replica = run_replicas(cfg.replicas, |r| {
        let inc = sample_increments(cov, grid, rng::replica_key(cfg.base_seed, r));
        let v0 = solve_linearized(model, cov, &u0, &inc)?;
        let mut row = Vec::with_capacity(cfg.eps_list.len());
        for eps in &cfg.eps_list {
            let scaling = ScalingSpec::clt(*eps)?;
            let u_eps = solve_sde(model, cov, xi, grid, &scaling, &inc)?;
            let inv = 1.0 / eps.sqrt();
            let v_eps = u_eps.linear_combination(inv, &u0, -inv);
            row.push([
                v_eps.sup_dist_sq(&v0),
                v_eps.int_v_dist_sq(model, &v0),
                u_eps.sup_dist_sq(&u0),
                u_eps.int_v_dist_sq(model, &u0),
            ]);
        }
        Ok(row)
    });
    let (rows, excluded) = admit_replicas(per_replica)?;
    if rows.len() < 2 {
        return Err(Error::invalid("too few surviving replicas"));
    }

    let mut clt_stats = Vec::with_capacity(cfg.eps_list.len());
    let mut first_order_stats = Vec::with_capacity(cfg.eps_list.len());
    for (i, eps) in cfg.eps_list.iter().enumerate() {
        let column = |j: usize| -> Vec<f64> { rows.iter().map(|row| row[i][j]).collect() };
        clt_stats.push(ErrorStatistic::from_samples(
            *eps,
            &column(0),
            &column(1),
            excluded,
        ));
        first_order_stats.push(ErrorStatistic::from_samples(
            *eps,
            &column(2),
            &column(3),
            excluded,
        ));
    }
    let d_means: Vec<f64> = clt_stats.iter().map(|s| s.combined).collect();
    let f_means: Vec<f64> = first_order_stats.iter().map(|s| s.combined).collect();
    let clt_slope = stats::log_log_slope(&cfg.eps_list, &d_means);
    let first_order_slope = stats::log_log_slope(&cfg.eps_list, &f_means);
    Ok(CltResult {
        clt_stats,
        first_order_stats,
        clt_slope,
        first_order_slope,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_linear_ou, LinearOuParams};

    #[test]
    fn linear_model_couples_exactly() {
        // V^eps and V^0 satisfy the same linear recursion, so D vanishes to
        // round-off for every eps.
        let model = make_linear_ou(&LinearOuParams {
            drift_rates: vec![1.0, 2.0],
            noise_amplitudes: vec![1.0, 0.5],
            reaction_matrix: vec![0.1, 0.0, 0.05, 0.1],
        })
        .unwrap();
        let cov = CovarianceSpec::power_law(2, 2.0);
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let xi = StateVector::new(vec![1.0, -0.5]).unwrap();
        let cfg = CltConfig {
            eps_list: vec![1e-2, 1e-4],
            replicas: 8,
            base_seed: 7,
        };
        let res = clt_experiment(&model, &cov, &xi, grid, &cfg).unwrap();
        for s in &res.clt_stats {
            assert!(s.combined <= 1e-20, "eps {}: D = {}", s.eps, s.combined);
        }
        assert_eq!(res.excluded, 0);
    }

    #[test]
    fn rejects_bad_eps_lists() {
        let model = make_linear_ou(&LinearOuParams::default()).unwrap();
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let xi = StateVector::zeros(1);
        for eps_list in [vec![], vec![2.0], vec![1e-3, 1e-2]] {
            let cfg = CltConfig {
                eps_list,
                replicas: 2,
                base_seed: 1,
            };
            assert!(clt_experiment(&model, &cov, &xi, grid, &cfg).is_err());
        }
    }
}
