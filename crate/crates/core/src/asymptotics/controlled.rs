//! Coupled convergence of the controlled moderate-deviation process to the
//! skeleton: X^eps and X^phi share the deterministic control, the noise is
//! the only perturbation, and the distance statistics must shrink along the
//! eps grid.

use super::{admit_replicas, run_replicas, validate_eps_list, ErrorStatistic};
use crate::error::{Error, Result};
use crate::integrators::{solve_controlled, solve_deterministic, solve_skeleton, ScalingSpec};
use crate::model::ModelSpec;
use crate::rng;
use crate::state::StateVector;
use crate::stochastics::{sample_increments, ControlPath, CovarianceSpec, TimeGrid};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ControlledConfig {
    pub eps_list: Vec<f64>,
    pub a_exponent: f64,
    pub replicas: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlledResult {
    pub stats: Vec<ErrorStatistic>,
    pub monotone_decreasing: bool,
    /// Final combined distance over the initial one.
    pub final_over_initial: f64,
    pub excluded: usize,
}

pub fn controlled_convergence(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    grid: TimeGrid,
    phi: &ControlPath,
    cfg: &ControlledConfig,
) -> Result<ControlledResult> {
    validate_eps_list(&cfg.eps_list)?;
    if cfg.replicas < 2 {
        return Err(Error::invalid("need at least 2 replicas"));
    }
    let u0 = solve_deterministic(model, xi, grid)?;
    let x_phi = solve_skeleton(model, cov, &u0, phi)?;

    let per_replica = run_replicas(cfg.replicas, |r| {
        let inc = sample_increments(cov, grid, rng::replica_key(cfg.base_seed, r));
        let mut row = Vec::with_capacity(cfg.eps_list.len());
        for eps in &cfg.eps_list {
            let scaling = ScalingSpec::mdp(*eps, cfg.a_exponent)?;
            let x_eps = solve_controlled(model, cov, &u0, &scaling, &inc, phi)?;
            row.push([
                x_eps.sup_dist_sq(&x_phi),
                x_eps.int_v_dist_sq(model, &x_phi),
            ]);
        }
        Ok(row)
    });
    let (rows, excluded) = admit_replicas(per_replica)?;
    if rows.len() < 2 {
        return Err(Error::invalid("too few surviving replicas"));
    }

    let mut stats = Vec::with_capacity(cfg.eps_list.len());
    for (i, eps) in cfg.eps_list.iter().enumerate() {
        let sup: Vec<f64> = rows.iter().map(|row| row[i][0]).collect();
        let int: Vec<f64> = rows.iter().map(|row| row[i][1]).collect();
        stats.push(ErrorStatistic::from_samples(*eps, &sup, &int, excluded));
    }
    let monotone_decreasing = stats
        .windows(2)
        .all(|w| w[1].combined <= w[0].combined * (1.0 + 1e-12));
    let final_over_initial = if stats[0].combined > 0.0 {
        stats.last().unwrap().combined / stats[0].combined
    } else {
        0.0
    };
    Ok(ControlledResult {
        stats,
        monotone_decreasing,
        final_over_initial,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_linear_ou, LinearOuParams};
    use crate::testutil;

    #[test]
    fn ou_distance_tracks_lambda_inverse_squared_variance() {
        // phi = 0 reduces the check to Z^eps -> 0 with terminal variance
        // Sigma_T / lambda^2 from the closed-form oracle.
        let model = make_linear_ou(&LinearOuParams::default()).unwrap();
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 512).unwrap();
        let xi = StateVector::zeros(1);
        let phi = ControlPath::zeros(grid, 1);
        let cfg = ControlledConfig {
            eps_list: vec![1e-2, 1e-3],
            a_exponent: 0.25,
            replicas: 4000,
            base_seed: 5,
        };
        let res = controlled_convergence(&model, &cov, &xi, grid, &phi, &cfg).unwrap();
        assert!(res.monotone_decreasing);
        // E sup |Z|^2 >= E |Z(T)|^2 = Sigma_T lambda^{-2}; compare orders
        for s in &res.stats {
            let lambda_sq = s.eps.powf(-0.5);
            let var = testutil::ou::gramian(1.0, 1.0, 1.0, 1.0) / lambda_sq;
            assert!(
                s.mean_sup_sq >= 0.5 * var && s.mean_sup_sq <= 10.0 * var,
                "eps {}: sup {} vs var {}",
                s.eps,
                s.mean_sup_sq,
                var
            );
        }
    }

    #[test]
    fn ou_mean_matches_skeleton_within_three_se() {
        // constant phi: E X^eps(T) equals X^phi(T) for the linear model
        let model = make_linear_ou(&LinearOuParams::default()).unwrap();
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let xi = StateVector::zeros(1);
        let u0 = solve_deterministic(&model, &xi, grid).unwrap();
        let phi = ControlPath::constant(grid, 1, 0, 0.7).unwrap();
        let x_phi = solve_skeleton(&model, &cov, &u0, &phi).unwrap();

        let replicas = 4000;
        let scaling = ScalingSpec::mdp(1e-2, 0.25).unwrap();
        let mut terminals = Vec::with_capacity(replicas);
        for r in 0..replicas {
            let inc = sample_increments(&cov, grid, rng::replica_key(77, r as u64));
            let x = solve_controlled(&model, &cov, &u0, &scaling, &inc, &phi).unwrap();
            terminals.push(x.terminal()[0]);
        }
        let (mean, se) = crate::stats::mean_se(&terminals);
        assert!(
            (mean - x_phi.terminal()[0]).abs() <= 3.0 * se,
            "mean {mean} vs skeleton {} (se {se})",
            x_phi.terminal()[0]
        );
    }
}
