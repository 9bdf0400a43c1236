//! Experiment dispatch: builds the model and covariance from the config,
//! runs the requested experiment inside a local worker pool, turns the
//! results into verdicts and CSV tables, and persists everything.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{ExperimentReport, Provenance, RunArtifacts, Verdict};
use anyhow::{bail, Context, Result};
use hydroscale_core::asymptotics::*;
use hydroscale_core::integrators::{
    self, solve_deterministic, solve_sde, ConvergenceSolver, ScalingSpec,
};
use hydroscale_core::stochastics::{clip_to_ball, fmt_f64, sample_increments, ControlPath};
use hydroscale_core::{rng, verify};
use std::path::{Path, PathBuf};
use std::time::Instant;

const DEFAULT_VERIFIER_SAMPLES: usize = 10_000;
const DUMPED_REPLICAS: usize = 8;

pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub passed: bool,
}

pub fn run(cfg: &ExperimentConfig, out_root: &Path, dump_paths: bool) -> Result<RunOutcome> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("building worker pool")?;
    let mut artifacts = pool.install(|| dispatch(cfg, dump_paths))?;
    artifacts.wall_clock_seconds = started.elapsed().as_secs_f64();
    artifacts.config_echo = cfg.to_toml_string()?;
    let passed = artifacts.report.passed();
    let run_dir = crate::report::write_artifacts(out_root, &artifacts)?;
    Ok(RunOutcome { run_dir, passed })
}

fn dispatch(cfg: &ExperimentConfig, dump_paths: bool) -> Result<RunArtifacts> {
    let report = match cfg.kind {
        ExperimentKind::Verify => run_verify(cfg),
        ExperimentKind::Clt => run_clt(cfg, dump_paths),
        ExperimentKind::Mdp => run_mdp(cfg),
        ExperimentKind::Rate => run_rate(cfg),
        ExperimentKind::Controlled => run_controlled(cfg, dump_paths),
        ExperimentKind::Modulus => run_modulus(cfg),
        ExperimentKind::Convergence => run_convergence(cfg),
    }?;
    Ok(report)
}

fn base_artifacts(report: ExperimentReport) -> RunArtifacts {
    RunArtifacts {
        report,
        config_echo: String::new(),
        tables: Vec::new(),
        dumps: Vec::new(),
        wall_clock_seconds: 0.0,
    }
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: cfg.base_seed,
    }
}

fn control_from_config(cfg: &ExperimentConfig, modes: usize) -> Result<ControlPath> {
    let c = cfg
        .control
        .as_ref()
        .context("this experiment needs a [control] section")?;
    let grid = cfg.grid.build()?;
    let raw = ControlPath::constant(grid, modes, c.mode, c.value)?;
    Ok(clip_to_ball(&raw, c.ball)?)
}

// --- verify -----------------------------------------------------------------

fn run_verify(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let n_samples = cfg.verifier_samples.unwrap_or(DEFAULT_VERIFIER_SAMPLES);
    let th = &cfg.thresholds;
    let rep = verify::verify_all(
        &model,
        &cov,
        &th.etas,
        n_samples,
        cfg.base_seed,
        th.antisymmetry_tol,
        th.slack,
    )?;

    let mut csv =
        String::from("condition,max_residual,empirical_constant,declared_constant,pass,samples\n");
    let mut verdicts = Vec::new();
    for r in &rep.records {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.condition,
            fmt_f64(r.max_residual),
            fmt_f64(r.empirical_constant),
            r.declared_constant.map(fmt_f64).unwrap_or_default(),
            r.pass,
            r.samples
        ));
        verdicts.push(Verdict::new(
            r.condition.clone(),
            r.pass,
            format!(
                "empirical {} vs declared {:?} (residual {})",
                r.empirical_constant, r.declared_constant, r.max_residual
            ),
        ));
    }
    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: rep.to_json(),
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("conditions.csv".into(), csv));
    Ok(artifacts)
}

// --- clt ----------------------------------------------------------------------

fn run_clt(cfg: &ExperimentConfig, dump_paths: bool) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let grid = cfg.grid.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let ex_cfg = CltConfig {
        eps_list: cfg.scaling.eps_list.clone(),
        replicas: cfg.replicas,
        base_seed: cfg.base_seed,
    };
    let res = clt_experiment(&model, &cov, &xi, grid, &ex_cfg)?;
    let th = &cfg.thresholds;

    let mut verdicts = Vec::new();
    if model.bilinear_is_zero() {
        let worst = res.clt_stats.iter().map(|s| s.combined).fold(0.0, f64::max);
        verdicts.push(Verdict::new(
            "linear coupling identity",
            worst <= th.linear_coupling_ceiling,
            format!("max D {} vs ceiling {}", worst, th.linear_coupling_ceiling),
        ));
    } else {
        let decreasing = res
            .clt_stats
            .windows(2)
            .all(|w| w[1].combined < w[0].combined);
        verdicts.push(Verdict::new(
            "coupled distance strictly decreasing",
            decreasing,
            format!(
                "D: {:?}",
                res.clt_stats.iter().map(|s| s.combined).collect::<Vec<_>>()
            ),
        ));
        let slope = res.clt_slope.unwrap_or(f64::NAN);
        verdicts.push(Verdict::new(
            "coupled distance slope",
            slope >= th.min_clt_slope,
            format!("fitted {slope} vs minimum {}", th.min_clt_slope),
        ));
        let fo = res.first_order_slope.unwrap_or(f64::NAN);
        verdicts.push(Verdict::new(
            "first-order deviation slope",
            (fo - th.first_order_slope_center).abs() <= th.first_order_slope_halfwidth,
            format!(
                "fitted {fo} vs {} +- {}",
                th.first_order_slope_center, th.first_order_slope_halfwidth
            ),
        ));
    }
    verdicts.push(exclusion_verdict(res.excluded, cfg.replicas));

    let mut csv = String::from(
        "eps,replicas,excluded,clt_sup_sq,clt_sup_se,clt_int_v_sq,clt_int_se,clt_combined,clt_combined_se,first_sup_sq,first_int_v_sq,first_combined\n",
    );
    for (s, f) in res.clt_stats.iter().zip(&res.first_order_stats) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(s.eps),
            s.replicas,
            s.excluded,
            fmt_f64(s.mean_sup_sq),
            fmt_f64(s.se_sup_sq),
            fmt_f64(s.mean_int_v_sq),
            fmt_f64(s.se_int_v_sq),
            fmt_f64(s.combined),
            fmt_f64(s.combined_se),
            fmt_f64(f.mean_sup_sq),
            fmt_f64(f.mean_int_v_sq),
            fmt_f64(f.combined),
        ));
    }

    // post-hoc moment audit over a small replica subset per eps
    let audit_replicas = cfg.replicas.min(64);
    let mut moments_csv =
        String::from("eps,p,paths,sup_moment,int_v_sq,int_weighted,int_interp4\n");
    let mut audits = Vec::new();
    for eps in &cfg.scaling.eps_list {
        let scaling = ScalingSpec::clt(*eps)?;
        let mut paths = Vec::with_capacity(audit_replicas);
        for r in 0..audit_replicas {
            let inc = sample_increments(&cov, grid, rng::replica_key(cfg.base_seed, r as u64));
            paths.push(solve_sde(&model, &cov, &xi, grid, &scaling, &inc)?);
        }
        let audit = moment_audit(&model, &paths, 2)?;
        moments_csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(*eps),
            audit.p,
            audit.paths,
            fmt_f64(audit.sup_moment),
            fmt_f64(audit.int_v_sq),
            fmt_f64(audit.int_weighted),
            fmt_f64(audit.int_interp4),
        ));
        audits.push((*eps, audit));
    }
    verdicts.push(Verdict::new(
        "moments uniformly bounded in eps",
        moments::uniformly_bounded(&audits, 2.0),
        "no moment grows beyond 2x its value at the largest eps".to_string(),
    ));

    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::to_value(&res)?,
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("distances.csv".into(), csv));
    artifacts.tables.push(("moments.csv".into(), moments_csv));
    if dump_paths {
        artifacts.dumps = dump_sde_paths(cfg, &model, &cov, &xi, grid)?;
    }
    Ok(artifacts)
}

fn dump_sde_paths(
    cfg: &ExperimentConfig,
    model: &hydroscale_core::ModelSpec,
    cov: &hydroscale_core::CovarianceSpec,
    xi: &hydroscale_core::StateVector,
    grid: hydroscale_core::TimeGrid,
) -> Result<Vec<(String, Vec<u8>)>> {
    let mut dumps = Vec::new();
    for (ei, eps) in cfg.scaling.eps_list.iter().enumerate() {
        let scaling = ScalingSpec::clt(*eps)?;
        for r in 0..cfg.replicas.min(DUMPED_REPLICAS) {
            let inc = sample_increments(cov, grid, rng::replica_key(cfg.base_seed, r as u64));
            let path = solve_sde(model, cov, xi, grid, &scaling, &inc)?;
            let mut bytes = Vec::new();
            path.write_binary(&mut bytes)?;
            dumps.push((format!("u_eps{ei}_r{r}.bin"), bytes));
            dumps.push((
                format!("u_eps{ei}_r{r}.json"),
                serde_json::to_vec_pretty(&path.provenance_json())?,
            ));
        }
    }
    Ok(dumps)
}

// --- mdp ----------------------------------------------------------------------

fn run_mdp(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let grid = cfg.grid.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let f = cfg
        .functional
        .as_ref()
        .context("mdp needs a [functional] section")?;
    let ex_cfg = TailConfig {
        eps_list: cfg.scaling.eps_list.clone(),
        a_exponent: cfg.scaling.a_exponent,
        probe_index: f.probe_index,
        threshold_c: f.threshold,
        replicas: cfg.replicas,
        base_seed: cfg.base_seed,
        importance: cfg.importance,
    };
    let res = mdp_tail_experiment(&model, &cov, &xi, grid, &ex_cfg)?;
    let th = &cfg.thresholds;

    let mut verdicts = Vec::new();
    if th.decay_target.is_finite() {
        let slope = res.decay_slope.unwrap_or(f64::NAN);
        let rel = (slope - th.decay_target).abs() / th.decay_target;
        verdicts.push(Verdict::new(
            "normalized decay limit",
            rel <= th.decay_rel_tol,
            format!(
                "fitted slope {slope} vs target {} (rel {rel:.4})",
                th.decay_target
            ),
        ));
    }
    if cfg.importance {
        let min_ess = res
            .estimates
            .iter()
            .map(|e| e.ess)
            .fold(f64::INFINITY, f64::min);
        verdicts.push(Verdict::new(
            "effective sample size",
            min_ess >= 100.0,
            format!("min ESS {min_ess}"),
        ));
    }
    let censored = res.estimates.iter().filter(|e| e.right_censored).count();
    verdicts.push(Verdict::new(
        "uncensored estimates",
        censored == 0 || !cfg.importance,
        format!("{censored} right-censored eps values"),
    ));

    let mut csv = String::from(
        "eps,lambda,lambda_sq,replicas,p_hat,se,normalized_decay,right_censored,importance,ess\n",
    );
    for e in &res.estimates {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(e.eps),
            fmt_f64(e.lambda),
            fmt_f64(e.lambda_sq),
            e.replicas,
            fmt_f64(e.p_hat),
            fmt_f64(e.se),
            e.normalized_decay.map(fmt_f64).unwrap_or_default(),
            e.right_censored,
            e.importance,
            fmt_f64(e.ess),
        ));
    }
    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::to_value(&res)?,
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("tails.csv".into(), csv));
    Ok(artifacts)
}

// --- rate ---------------------------------------------------------------------

fn run_rate(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let grid = cfg.grid.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let f = cfg
        .functional
        .as_ref()
        .context("rate needs a [functional] section")?;
    let u0 = solve_deterministic(&model, &xi, grid)?;
    let rate_cfg = RateConfig {
        probe_index: f.probe_index,
        target: f.threshold,
        ..RateConfig::default()
    };
    let sol = rate_function(&model, &cov, &u0, &rate_cfg)?;
    let th = &cfg.thresholds;

    let mut verdicts = vec![Verdict::new(
        "optimizer converged",
        sol.converged,
        format!(
            "gradient norm {} after {} iterations",
            sol.grad_norm, sol.iterations
        ),
    )];
    if th.decay_target.is_finite() {
        let rel = (sol.extrapolated_action - th.decay_target).abs() / th.decay_target;
        verdicts.push(Verdict::new(
            "extrapolated action vs target constant",
            rel <= th.rate_rel_tol,
            format!(
                "extrapolated {} vs {} (rel {rel:.5})",
                sol.extrapolated_action, th.decay_target
            ),
        ));
    }
    // adjoint gradient spot-check against central differences
    let op = RateOperator::build(&model, &cov, &u0, f.probe_index)?;
    let worst = gradient_check(&op, 20, cfg.base_seed, f.threshold);
    verdicts.push(Verdict::new(
        "adjoint gradient vs central differences",
        worst <= 1e-6,
        format!("worst relative error {worst:.3e} over 20 pairs"),
    ));

    let mut csv = String::from("beta,action_value,terminal_residual\n");
    for b in &sol.beta_sweep {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(b.beta),
            fmt_f64(b.action_value),
            fmt_f64(b.terminal_residual)
        ));
    }
    let mut control_csv = Vec::new();
    sol.control.write_csv(&mut control_csv)?;
    let mut skeleton_csv = Vec::new();
    sol.skeleton.write_csv(&model, &mut skeleton_csv)?;

    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::to_value(&sol)?,
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("beta_sweep.csv".into(), csv));
    artifacts
        .tables
        .push(("control.csv".into(), String::from_utf8(control_csv)?));
    artifacts
        .tables
        .push(("skeleton.csv".into(), String::from_utf8(skeleton_csv)?));
    Ok(artifacts)
}

/// Worst relative error of the adjoint directional derivative against the
/// central difference of the objective over random (h, dh) pairs.
pub fn gradient_check(op: &RateOperator, pairs: usize, seed: u64, target: f64) -> f64 {
    let dim = op.steps() * op.modes();
    let beta = 37.0;
    let delta = 1e-5;
    let mut worst: f64 = 0.0;
    for trial in 0..pairs as u64 {
        let h = hydroscale_core::testutil::gaussian_vec(dim, rng::mix64(seed ^ 0xAA) + trial, 0);
        let dh = hydroscale_core::testutil::gaussian_vec(dim, rng::mix64(seed ^ 0xBB) + trial, 0);
        let grad = op.gradient(&h, beta, target);
        let directional: f64 = grad.iter().zip(&dh).map(|(a, b)| a * b).sum();
        let mut hp = h.clone();
        let mut hm = h.clone();
        for ((p, m), d) in hp.iter_mut().zip(hm.iter_mut()).zip(&dh) {
            *p += delta * d;
            *m -= delta * d;
        }
        let fd =
            (op.objective(&hp, beta, target) - op.objective(&hm, beta, target)) / (2.0 * delta);
        worst = worst.max((directional - fd).abs() / (1.0 + fd.abs()));
    }
    worst
}

// --- controlled -----------------------------------------------------------------

fn run_controlled(cfg: &ExperimentConfig, dump_paths: bool) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let grid = cfg.grid.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let phi = control_from_config(cfg, cov.modes())?;
    let ex_cfg = ControlledConfig {
        eps_list: cfg.scaling.eps_list.clone(),
        a_exponent: cfg.scaling.a_exponent,
        replicas: cfg.replicas,
        base_seed: cfg.base_seed,
    };
    let res = controlled_convergence(&model, &cov, &xi, grid, &phi, &ex_cfg)?;
    let th = &cfg.thresholds;

    let verdicts = vec![
        Verdict::new(
            "coupled distance monotone decreasing",
            res.monotone_decreasing,
            format!(
                "D: {:?}",
                res.stats.iter().map(|s| s.combined).collect::<Vec<_>>()
            ),
        ),
        Verdict::new(
            "final distance fraction",
            res.final_over_initial <= th.final_over_initial,
            format!(
                "final/initial {} vs ceiling {}",
                res.final_over_initial, th.final_over_initial
            ),
        ),
        exclusion_verdict(res.excluded, cfg.replicas),
    ];

    let mut csv =
        String::from("eps,replicas,excluded,sup_sq,sup_se,int_v_sq,int_se,combined,combined_se\n");
    for s in &res.stats {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(s.eps),
            s.replicas,
            s.excluded,
            fmt_f64(s.mean_sup_sq),
            fmt_f64(s.se_sup_sq),
            fmt_f64(s.mean_int_v_sq),
            fmt_f64(s.se_int_v_sq),
            fmt_f64(s.combined),
            fmt_f64(s.combined_se),
        ));
    }
    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::to_value(&res)?,
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("distances.csv".into(), csv));
    if dump_paths {
        let u0 = solve_deterministic(&model, &xi, grid)?;
        let mut dumps = Vec::new();
        for (ei, eps) in cfg.scaling.eps_list.iter().enumerate() {
            let scaling = ScalingSpec::mdp(*eps, cfg.scaling.a_exponent)?;
            for r in 0..cfg.replicas.min(DUMPED_REPLICAS) {
                let inc = sample_increments(&cov, grid, rng::replica_key(cfg.base_seed, r as u64));
                let path = integrators::solve_controlled(&model, &cov, &u0, &scaling, &inc, &phi)?;
                let mut bytes = Vec::new();
                path.write_binary(&mut bytes)?;
                dumps.push((format!("x_eps{ei}_r{r}.bin"), bytes));
            }
        }
        artifacts.dumps = dumps;
    }
    Ok(artifacts)
}

// --- modulus --------------------------------------------------------------------

fn run_modulus(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let grid = cfg.grid.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let phi = control_from_config(cfg, cov.modes())?;
    if cfg.modulus_n_list.is_empty() {
        bail!("modulus needs modulus_n_list");
    }
    let eps = *cfg
        .scaling
        .eps_list
        .first()
        .context("modulus needs one eps in scaling.eps_list")?;
    let ex_cfg = ModulusConfig {
        eps,
        a_exponent: cfg.scaling.a_exponent,
        n_list: cfg.modulus_n_list.clone(),
        replicas: cfg.replicas,
        base_seed: cfg.base_seed,
        clip: cfg.modulus_clip.unwrap_or(25.0),
    };
    let res = increment_modulus(&model, &cov, &xi, grid, &phi, &ex_cfg)?;
    let th = &cfg.thresholds;

    let exponent = res.fitted_exponent.unwrap_or(f64::NAN);
    let verdicts = vec![
        Verdict::new(
            "modulus decay exponent",
            exponent >= th.min_modulus_exponent,
            format!("fitted {exponent} vs minimum {}", th.min_modulus_exponent),
        ),
        exclusion_verdict(res.excluded, cfg.replicas),
    ];

    let mut csv = String::from("n,shift,m_n,se,included\n");
    for r in &res.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            fmt_f64(r.shift),
            fmt_f64(r.m_n),
            fmt_f64(r.se),
            res.included
        ));
    }
    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::to_value(&res)?,
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("modulus.csv".into(), csv));
    Ok(artifacts)
}

// --- convergence ----------------------------------------------------------------

fn run_convergence(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let model = cfg.model.build()?;
    let cov = cfg.covariance.build()?;
    let xi = cfg.initial.build(model.dimension())?;
    let finest = cfg.finest_level.context("convergence needs finest_level")?;
    if cfg.coarse_levels.is_empty() {
        bail!("convergence needs coarse_levels");
    }
    let eps = *cfg
        .scaling
        .eps_list
        .first()
        .context("convergence needs one eps in scaling.eps_list")?;
    let t_end = cfg.grid.t_end;
    let th = &cfg.thresholds;

    let det = integrators::self_convergence(
        &model,
        &cov,
        &xi,
        t_end,
        finest,
        &cfg.coarse_levels,
        &ScalingSpec::clt(0.0)?,
        ConvergenceSolver::Deterministic,
        1,
        cfg.base_seed,
    )?;
    let sde = integrators::self_convergence(
        &model,
        &cov,
        &xi,
        t_end,
        finest,
        &cfg.coarse_levels,
        &ScalingSpec::clt(eps)?,
        ConvergenceSolver::Sde,
        cfg.replicas,
        cfg.base_seed,
    )?;

    let verdicts = vec![
        Verdict::new(
            "deterministic strong order",
            det.fitted_order >= th.min_order_deterministic,
            format!(
                "fitted {} vs minimum {}",
                det.fitted_order, th.min_order_deterministic
            ),
        ),
        Verdict::new(
            "stochastic strong order",
            sde.fitted_order >= th.min_order_sde,
            format!(
                "fitted {} vs minimum {}",
                sde.fitted_order, th.min_order_sde
            ),
        ),
    ];

    let mut csv = String::from("solver,dt,error\n");
    for (dt, err) in det.dts.iter().zip(&det.errors) {
        csv.push_str(&format!(
            "deterministic,{},{}\n",
            fmt_f64(*dt),
            fmt_f64(*err)
        ));
    }
    for (dt, err) in sde.dts.iter().zip(&sde.errors) {
        csv.push_str(&format!("sde,{},{}\n", fmt_f64(*dt), fmt_f64(*err)));
    }
    let report = ExperimentReport {
        kind: cfg.kind.to_string(),
        provenance: provenance(cfg),
        verdicts,
        summary: serde_json::json!({
            "deterministic": det,
            "sde": sde,
        }),
    };
    let mut artifacts = base_artifacts(report);
    artifacts.tables.push(("orders.csv".into(), csv));
    Ok(artifacts)
}

fn exclusion_verdict(excluded: usize, total: usize) -> Verdict {
    Verdict::new(
        "replica exclusions",
        (excluded as f64) * 100.0 <= MAX_EXCLUDED_PERCENT * total as f64,
        format!("{excluded} of {total} excluded"),
    )
}
