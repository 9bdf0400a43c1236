#![allow(clippy::field_reassign_with_default)]

//! Closed-form and brute-force oracle checks across module boundaries.

use hydroscale_core::integrators::*;
use hydroscale_core::models::*;
use hydroscale_core::state::{dot, StateVector};
use hydroscale_core::stats;
use hydroscale_core::stochastics::*;
use hydroscale_core::testutil;
use hydroscale_core::{rng, InterpNorm, ModelSpec};

fn ou_unit() -> ModelSpec {
    make_linear_ou(&LinearOuParams::default()).unwrap()
}

#[test]
fn ou_small_noise_variance_matches_closed_form() {
    // E |u^eps(T) - u^0(T)|^2 = eps q s^2 (1 - e^{-2T}) / 2 within 3 SE
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 2048).unwrap();
    let xi = StateVector::new(vec![1.0]).unwrap();
    let eps = 1e-2;
    let scaling = ScalingSpec::clt(eps).unwrap();
    let u0 = solve_deterministic(&model, &xi, grid).unwrap();

    let replicas = 10_000;
    let mut sq = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let inc = sample_increments(&cov, grid, rng::replica_key(101, r as u64));
        let u_eps = solve_sde(&model, &cov, &xi, grid, &scaling, &inc).unwrap();
        let d = u_eps.terminal()[0] - u0.terminal()[0];
        sq.push(d * d);
    }
    let (mean, se) = stats::mean_se(&sq);
    let expect = testutil::ou::variance(1.0, 1.0, 1.0, eps, 1.0);
    assert!(
        (mean - expect).abs() <= 3.0 * se + 2e-3 * expect,
        "var {mean} vs oracle {expect} (se {se})"
    );
}

#[test]
fn ou_linearized_variance_is_eps_free() {
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 2048).unwrap();
    let u0 = solve_deterministic(&model, &StateVector::new(vec![1.0]).unwrap(), grid).unwrap();
    let replicas = 10_000;
    let mut sq = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let inc = sample_increments(&cov, grid, rng::replica_key(55, r as u64));
        let v0 = solve_linearized(&model, &cov, &u0, &inc).unwrap();
        sq.push(v0.terminal()[0] * v0.terminal()[0]);
    }
    let (mean, se) = stats::mean_se(&sq);
    let expect = testutil::ou::variance(1.0, 1.0, 1.0, 1.0, 1.0);
    assert!(
        (mean - expect).abs() <= 3.0 * se + 2e-3 * expect,
        "var {mean} vs oracle {expect}"
    );
}

#[test]
fn ou_fluctuation_equals_linearized_pathwise() {
    // (u^eps - u^0)/sqrt(eps) and V^0 satisfy the same linear recursion
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let xi = StateVector::new(vec![0.3]).unwrap();
    let u0 = solve_deterministic(&model, &xi, grid).unwrap();
    let inc = sample_increments(&cov, grid, 42);
    let v0 = solve_linearized(&model, &cov, &u0, &inc).unwrap();
    for eps in [1e-1, 1e-3, 1e-6] {
        let scaling = ScalingSpec::clt(eps).unwrap();
        let u_eps = solve_sde(&model, &cov, &xi, grid, &scaling, &inc).unwrap();
        let inv = 1.0 / eps.sqrt();
        let v_eps = u_eps.linear_combination(inv, &u0, -inv);
        let d = v_eps.sup_dist_sq(&v0).sqrt();
        assert!(d <= 1e-10, "eps {eps}: pathwise gap {d}");
    }
}

#[test]
fn ou_moderate_variance_scales_with_lambda() {
    // Var Z^eps(T) = lambda^{-2} (1 - e^{-2}) / 2
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 1024).unwrap();
    let u0 = solve_deterministic(&model, &StateVector::zeros(1), grid).unwrap();
    let eps = 1e-2;
    let scaling = ScalingSpec::mdp(eps, 0.25).unwrap();
    let replicas = 10_000;
    let mut sq = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let inc = sample_increments(&cov, grid, rng::replica_key(7, r as u64));
        let z = solve_moderate(&model, &cov, &u0, &scaling, &inc).unwrap();
        sq.push(z.terminal()[0] * z.terminal()[0]);
    }
    let (mean, se) = stats::mean_se(&sq);
    let expect = testutil::ou::gramian(1.0, 1.0, 1.0, 1.0) / (scaling.lambda * scaling.lambda);
    assert!(
        (mean - expect).abs() <= 3.0 * se + 2e-3 * expect,
        "var {mean} vs oracle {expect}"
    );
}

#[test]
fn ou_controlled_approaches_skeleton_as_eps_shrinks() {
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let u0 = solve_deterministic(&model, &StateVector::zeros(1), grid).unwrap();
    let phi = ControlPath::constant(grid, 1, 0, 0.5).unwrap();
    let x_phi = solve_skeleton(&model, &cov, &u0, &phi).unwrap();
    let mut last = f64::INFINITY;
    for eps in [1e-2, 1e-3, 1e-4] {
        let scaling = ScalingSpec::mdp(eps, 0.25).unwrap();
        // average over a few replicas to smooth the comparison
        let mut acc = 0.0;
        for r in 0..64u64 {
            let inc = sample_increments(&cov, grid, rng::replica_key(13, r));
            let x = solve_controlled(&model, &cov, &u0, &scaling, &inc, &phi).unwrap();
            acc += x.sup_dist_sq(&x_phi) / 64.0;
        }
        assert!(acc < last, "eps {eps}: {acc} not below {last}");
        last = acc;
    }
}

#[test]
fn shell_energy_identity_with_no_noise_or_reaction() {
    let mut p = ShellParams::default();
    p.n_shells = 8;
    p.viscosity = 0.05;
    p.reaction = ShellReaction::Zero;
    p.noise = ShellNoise::Zero;
    let m = make_shell_model(&p).unwrap();
    let grid = TimeGrid::new(1.0, 1 << 14).unwrap();
    let mut xi = vec![0.0; 8];
    xi[0] = 0.8;
    xi[1] = 0.6;
    let xi = StateVector::new(xi).unwrap();
    let path = solve_deterministic(&m, &xi, grid).unwrap();
    let lhs = dot(path.terminal(), path.terminal()) + 2.0 * path.int_v_sq(&m);
    let xi_sq = dot(xi.as_slice(), xi.as_slice());
    // the identity holds up to the O(dt) cross term of the explicit
    // bilinear step (sign-indefinite, so no strict one-sided bound)
    let rel = (lhs - xi_sq).abs() / xi_sq;
    assert!(rel < 0.01, "relative defect {rel}");
    assert!(
        rel < 1e-3,
        "defect should be at integrator-tolerance scale, got {rel}"
    );
}

#[test]
fn spectral_single_mode_decays_like_the_resolvent() {
    let p = SpectralNsParams {
        max_wavenumber: 3,
        viscosity: 0.7,
        noise_gains: Vec::new(),
        reaction_rho: 0.0,
    };
    let m = make_spectral_ns(&p).unwrap();
    let geom = spectral_geometry(&p).unwrap();
    let n = geom.dimension();
    // single vortex on mode (1, 2)
    let j = geom
        .half_modes
        .iter()
        .position(|k| *k == (1, 2))
        .expect("mode present");
    let mut xi = vec![0.0; n];
    xi[2 * j] = 1.1;
    xi[2 * j + 1] = -0.4;
    let xi = StateVector::new(xi).unwrap();
    let steps = 512;
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let path = solve_deterministic(&m, &xi, grid).unwrap();
    // the nonlinear term self-cancels, so the discrete path is exactly the
    // resolvent power and close to the exponential
    let alpha = 0.7 * 5.0;
    let resolvent_power = (1.0 + alpha / steps as f64).powi(-(steps as i32));
    for (i, x) in path.terminal().iter().enumerate() {
        let expect = xi.as_slice()[i] * resolvent_power;
        assert!((x - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }
    let exp_decay = (-alpha).exp();
    assert!((resolvent_power - exp_decay).abs() / exp_decay < 0.02);
}

#[test]
fn lq_norm_matches_dense_trace_arithmetic() {
    // sigma given by a dense matrix on a small instance: |sigma|_LQ^2 must
    // equal trace(sigma Q sigma^T) computed by dense products
    let n = 6;
    let mat: Vec<f64> = testutil::gaussian_vec(n * n, 17, 0);
    let mat_sigma = mat.clone();
    let model = ModelSpec::builder("dense-sigma", vec![1.0; 6])
        .noise_coefficient(Box::new(move |_t, _u, w: &[f64]| {
            (0..6)
                .map(|i| (0..6).map(|j| mat_sigma[i * 6 + j] * w[j]).sum())
                .collect()
        }))
        .interp_norm(InterpNorm::GeometricMean)
        .build()
        .unwrap();
    let q = vec![0.9, 0.5, 0.25, 0.1, 0.0, 0.01];
    let cov = CovarianceSpec::new(q.clone()).unwrap();
    let direct = lq_norm(&model, &cov, 0.0, &[0.0; 6]);

    // dense trace(sigma Q sigma^T) = sum_{i,j} sigma_ij^2 q_j
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace += mat[i * n + j] * mat[i * n + j] * q[j];
        }
    }
    assert!(
        (direct * direct - trace).abs() <= 1e-10 * (1.0 + trace),
        "{} vs {}",
        direct * direct,
        trace
    );
}

#[test]
fn per_mode_increment_variance_is_unbiased() {
    let cov = CovarianceSpec::power_law(3, 2.0);
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let draws = 120_000; // replicas * steps per mode
    let mut acc: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(draws)).collect();
    let mut r = 0u64;
    while acc[0].len() < draws {
        let inc = sample_increments(&cov, grid, rng::replica_key(23, r));
        for k in 0..grid.steps() {
            for (j, slot) in acc.iter_mut().enumerate() {
                slot.push(inc.step(k)[j]);
            }
        }
        r += 1;
    }
    let dt = grid.dt();
    for (j, q) in cov.eigenvalues().iter().enumerate() {
        let sq: Vec<f64> = acc[j].iter().map(|x| x * x).collect();
        let (mean, se) = stats::mean_se(&sq);
        let expect = q * dt;
        assert!(
            (mean - expect).abs() <= 5.0 * se,
            "mode {j}: {mean} vs {expect} (se {se})"
        );
    }
}

#[test]
fn noise_operator_is_linear_in_the_coordinates() {
    let m = make_shell_model(&ShellParams::default()).unwrap();
    let cov = CovarianceSpec::power_law(10, 2.0);
    let u = testutil::gaussian_vec(10, 3, 0);
    let w1 = testutil::gaussian_vec(10, 3, 100);
    let w2 = testutil::gaussian_vec(10, 3, 200);
    let combo: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 2.0 * a - 0.3 * b).collect();
    let s1 = apply_noise_operator(&m, &cov, 0.4, &u, &w1).unwrap();
    let s2 = apply_noise_operator(&m, &cov, 0.4, &u, &w2).unwrap();
    let sc = apply_noise_operator(&m, &cov, 0.4, &u, &combo).unwrap();
    for i in 0..10 {
        let expect = 2.0 * s1[i] - 0.3 * s2[i];
        assert!((sc[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn ou_exact_transition_oracle_confirms_em_order_one() {
    // EM with additive noise against exact exponential stepping on the
    // finest grid, increments shared through the L2-projection weight
    let model = ou_unit();
    let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
    let a = 1.0;
    let eps = 0.01;
    let finest_log2 = 13u32;
    let t_end = 1.0;
    let fine_grid = TimeGrid::new(t_end, 1 << finest_log2).unwrap();
    let levels = [7u32, 8, 9, 10];
    let replicas = 32;
    let scaling = ScalingSpec::clt(eps).unwrap();

    let mut sq_err = vec![0.0; levels.len()];
    for r in 0..replicas as u64 {
        let inc = sample_increments(&cov, fine_grid, rng::replica_key(31, r));
        // exact transition reference on the finest grid
        let dt = fine_grid.dt();
        let decay = (-a * dt).exp();
        let weight = (1.0 - decay) / (a * dt); // L2 projection onto the increment
        let mut reference = vec![1.0];
        for k in 0..fine_grid.steps() {
            let prev = *reference.last().unwrap();
            reference.push(decay * prev + eps.sqrt() * weight * decay.sqrt() * inc.step(k)[0]);
        }
        for (li, lvl) in levels.iter().enumerate() {
            let factor = 1usize << (finest_log2 - lvl);
            let coarse = inc.coarsen(factor).unwrap();
            let path = solve_sde(
                &model,
                &cov,
                &StateVector::new(vec![1.0]).unwrap(),
                coarse.grid(),
                &scaling,
                &coarse,
            )
            .unwrap();
            let mut sup = 0.0f64;
            for k in 0..path.len() {
                let d = path.state(k)[0] - reference[k * factor];
                sup = sup.max(d * d);
            }
            sq_err[li] += sup / replicas as f64;
        }
    }
    let dts: Vec<f64> = levels.iter().map(|l| t_end / (1u64 << l) as f64).collect();
    let errs: Vec<f64> = sq_err.iter().map(|e| e.sqrt()).collect();
    let order = stats::log_log_slope(&dts, &errs).unwrap();
    assert!(order >= 0.9, "fitted order {order}, errors {errs:?}");
}
