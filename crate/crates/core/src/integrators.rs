//! Semi-implicit Euler-Maruyama time stepping for the whole equation family.
//!
//! Every solver advances u_{k+1} = (I + dt A)^{-1} [u_k + dt F_k + G_k]
//! with A applied diagonally through its spectrum, the bilinear/reaction
//! drift F evaluated explicitly at the left endpoint (Ito convention), and
//! G collecting noise and control forcing. Identical inputs give
//! bit-identical paths. A state that leaves the finite range aborts the
//! solve with the offending step; nothing is clamped.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::state::{self, StateVector};
use crate::stochastics::{fmt_f64, ControlPath, CovarianceSpec, TimeGrid, WienerIncrements};
use serde::Serialize;
use std::io::Write;

/// Small-noise scaling: eps is the noise intensity, lambda the deviation
/// scale. CLT runs use lambda = 1; MDP runs use lambda = eps^{-a} with
/// a in (0, 1/2), which keeps sqrt(eps) * lambda < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingSpec {
    pub eps: f64,
    pub lambda: f64,
}

impl ScalingSpec {
    pub fn clt(eps: f64) -> Result<ScalingSpec> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!(
                "eps must be nonnegative, got {eps}"
            )));
        }
        Ok(ScalingSpec { eps, lambda: 1.0 })
    }

    pub fn mdp(eps: f64, a_exponent: f64) -> Result<ScalingSpec> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if !(a_exponent > 0.0 && a_exponent < 0.5) {
            return Err(Error::invalid(format!(
                "moderate-deviation exponent must lie in (0, 1/2), got {a_exponent}"
            )));
        }
        let lambda = eps.powf(-a_exponent);
        let spec = ScalingSpec { eps, lambda };
        spec.require_moderate()?;
        Ok(spec)
    }

    pub fn sqrt_eps_lambda(&self) -> f64 {
        self.eps.sqrt() * self.lambda
    }

    pub fn require_moderate(&self) -> Result<()> {
        if self.sqrt_eps_lambda() >= 1.0 {
            return Err(Error::invalid(format!(
                "scaling regime violated: sqrt(eps) * lambda = {} >= 1",
                self.sqrt_eps_lambda()
            )));
        }
        Ok(())
    }
}

/// Which equation produced a path, and under which scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub equation: String,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
}

impl Provenance {
    fn deterministic(eq: &str) -> Provenance {
        Provenance {
            equation: eq.to_string(),
            eps: None,
            lambda: None,
            seed: None,
        }
    }

    fn stochastic(eq: &str, scaling: Option<&ScalingSpec>, seed: u64) -> Provenance {
        Provenance {
            equation: eq.to_string(),
            eps: scaling.map(|s| s.eps),
            lambda: scaling.map(|s| s.lambda),
            seed: Some(seed),
        }
    }
}

/// A trajectory on a uniform grid: steps + 1 states, provenance attached.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    grid: TimeGrid,
    states: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl StatePath {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.states[0].len()
    }

    /// sup_k |u_k|^2.
    pub fn sup_h_sq(&self) -> f64 {
        self.states
            .iter()
            .map(|u| state::dot(u, u))
            .fold(0.0, f64::max)
    }

    /// Right-endpoint quadrature of int ||u||^2 dt, matching the discrete
    /// energy identity of the semi-implicit step.
    pub fn int_v_sq(&self, model: &ModelSpec) -> f64 {
        let dt = self.grid.dt();
        self.states[1..]
            .iter()
            .map(|u| {
                let v = model.v_norm(u);
                v * v * dt
            })
            .sum()
    }

    /// sup_k |u_k - w_k|^2 of two paths on the same grid.
    pub fn sup_dist_sq(&self, other: &StatePath) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Right-endpoint quadrature of int ||u - w||^2 dt.
    pub fn int_v_dist_sq(&self, model: &ModelSpec, other: &StatePath) -> f64 {
        let dt = self.grid.dt();
        self.states[1..]
            .iter()
            .zip(&other.states[1..])
            .map(|(a, b)| {
                let d = state::sub(a, b);
                let v = model.v_norm(&d);
                v * v * dt
            })
            .sum()
    }

    /// int |u|^{2p-2} ||u||^2 dt (right endpoint).
    pub fn int_weighted_v_sq(&self, model: &ModelSpec, p: u32) -> f64 {
        let dt = self.grid.dt();
        self.states[1..]
            .iter()
            .map(|u| {
                let h2 = state::dot(u, u);
                let v = model.v_norm(u);
                h2.powi(p as i32 - 1) * v * v * dt
            })
            .sum()
    }

    /// int ||u||_H^4 dt (right endpoint).
    pub fn int_interp4(&self, model: &ModelSpec) -> f64 {
        let dt = self.grid.dt();
        self.states[1..]
            .iter()
            .map(|u| model.interp_norm(u).powi(4) * dt)
            .sum()
    }

    /// Scaled pointwise combination a*self + b*other, keeping provenance of
    /// self; used for reconstruction identities.
    pub fn linear_combination(&self, a: f64, other: &StatePath, b: f64) -> StatePath {
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(x, y)| x.iter().zip(y).map(|(xi, yi)| a * xi + b * yi).collect())
            .collect();
        StatePath {
            grid: self.grid,
            states,
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.grid.t_end().to_le_bytes())?;
        w.write_all(&(self.grid.steps() as u64).to_le_bytes())?;
        w.write_all(&(self.dimension() as u64).to_le_bytes())?;
        w.write_all(&self.provenance.seed.unwrap_or(0).to_le_bytes())?;
        for s in &self.states {
            for x in s {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn provenance_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.provenance).unwrap()
    }

    /// Per-node (t, |u|, ||u||, ||u||_H) table.
    pub fn write_csv(&self, model: &ModelSpec, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "t,h_norm,v_norm,interp_norm")?;
        for (k, s) in self.states.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(self.grid.node(k)),
                fmt_f64(state::h_norm(s)),
                fmt_f64(model.v_norm(s)),
                fmt_f64(model.interp_norm(s)),
            )?;
        }
        Ok(())
    }
}

fn resolvent(model: &ModelSpec, dt: f64) -> Vec<f64> {
    model
        .a_spectrum()
        .iter()
        .map(|a| 1.0 / (1.0 + dt * a))
        .collect()
}

fn advance(res: &[f64], u: &[f64], drift: &[f64], force: Option<&[f64]>, dt: f64) -> Vec<f64> {
    let mut next: Vec<f64> = u.iter().zip(drift).map(|(ui, fi)| ui + dt * fi).collect();
    if let Some(g) = force {
        for (n, gi) in next.iter_mut().zip(g) {
            *n += gi;
        }
    }
    for (n, r) in next.iter_mut().zip(res) {
        *n *= r;
    }
    next
}

fn check_finite(u: &[f64], step: usize, context: &str) -> Result<()> {
    if state::all_finite(u) {
        Ok(())
    } else {
        Err(Error::BlowUp {
            step,
            context: context.to_string(),
        })
    }
}

fn check_noise_space(model: &ModelSpec, cov: &CovarianceSpec) -> Result<()> {
    if cov.modes() > model.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: cov.modes(),
        });
    }
    Ok(())
}

fn check_grid(expected: TimeGrid, got: TimeGrid, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(format!(
            "{what} grid mismatch: expected {expected:?}, got {got:?}"
        )));
    }
    Ok(())
}

/// Pads an m-mode noise row to the model dimension.
fn pad(w: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[..w.len()].copy_from_slice(w);
    out
}

/// The deterministic limit equation: du + Au + B(u) + R(t,u) = 0.
pub fn solve_deterministic(
    model: &ModelSpec,
    xi: &StateVector,
    grid: TimeGrid,
) -> Result<StatePath> {
    model.check_dimension(xi.as_slice())?;
    let dt = grid.dt();
    let res = resolvent(model, dt);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(xi.as_slice().to_vec());
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let u = &states[k];
        let drift = deterministic_drift(model, t, u);
        let next = advance(&res, u, &drift, None, dt);
        check_finite(&next, k + 1, "deterministic")?;
        states.push(next);
    }
    Ok(StatePath {
        grid,
        states,
        provenance: Provenance::deterministic("deterministic"),
    })
}

fn deterministic_drift(model: &ModelSpec, t: f64, u: &[f64]) -> Vec<f64> {
    let mut drift = model.reaction(t, u);
    if !model.bilinear_is_zero() {
        let b = model.bilinear(u, u);
        for (d, bi) in drift.iter_mut().zip(&b) {
            *d += bi;
        }
    }
    drift.iter_mut().for_each(|d| *d = -*d);
    drift
}

/// The small-noise equation: noise term sqrt(eps) sigma(t, u) dW.
pub fn solve_sde(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    grid: TimeGrid,
    scaling: &ScalingSpec,
    inc: &WienerIncrements,
) -> Result<StatePath> {
    model.check_dimension(xi.as_slice())?;
    check_noise_space(model, cov)?;
    check_grid(grid, inc.grid(), "increments")?;
    if cov.modes() != inc.modes() {
        return Err(Error::invalid(
            "covariance and increments disagree on modes",
        ));
    }
    let dt = grid.dt();
    let n = model.dimension();
    let res = resolvent(model, dt);
    let sqrt_eps = scaling.eps.sqrt();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(xi.as_slice().to_vec());
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let u = &states[k];
        let drift = deterministic_drift(model, t, u);
        let force = if scaling.eps > 0.0 {
            let mut g = model.sigma(t, u, &pad(inc.step(k), n));
            g.iter_mut().for_each(|x| *x *= sqrt_eps);
            Some(g)
        } else {
            None
        };
        let next = advance(&res, u, &drift, force.as_deref(), dt);
        check_finite(&next, k + 1, "sde")?;
        states.push(next);
    }
    Ok(StatePath {
        grid,
        states,
        provenance: Provenance::stochastic("sde", Some(scaling), inc.seed()),
    })
}

/// The linearized fluctuation equation driven by sigma(t, u0) dW from zero
/// initial data; exactly linear in the increments at scheme level.
pub fn solve_linearized(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    inc: &WienerIncrements,
) -> Result<StatePath> {
    model.check_dimension(u0.state(0))?;
    check_noise_space(model, cov)?;
    check_grid(u0.grid(), inc.grid(), "increments")?;
    if cov.modes() != inc.modes() {
        return Err(Error::invalid(
            "covariance and increments disagree on modes",
        ));
    }
    let grid = u0.grid();
    let dt = grid.dt();
    let n = model.dimension();
    let res = resolvent(model, dt);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(vec![0.0; n]);
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let v = &states[k];
        let base = u0.state(k);
        let drift = linearized_drift(model, t, base, v);
        let g = model.sigma(t, base, &pad(inc.step(k), n));
        let next = advance(&res, v, &drift, Some(&g), dt);
        check_finite(&next, k + 1, "linearized")?;
        states.push(next);
    }
    Ok(StatePath {
        grid,
        states,
        provenance: Provenance::stochastic("linearized", None, inc.seed()),
    })
}

/// -B(v, u0) - B(u0, v) - R'(t, u0) v
fn linearized_drift(model: &ModelSpec, t: f64, u0: &[f64], v: &[f64]) -> Vec<f64> {
    let mut drift = model.reaction_derivative(t, u0, v);
    if !model.bilinear_is_zero() {
        let b1 = model.bilinear(v, u0);
        let b2 = model.bilinear(u0, v);
        for ((d, x), y) in drift.iter_mut().zip(&b1).zip(&b2) {
            *d += x + y;
        }
    }
    drift.iter_mut().for_each(|d| *d = -*d);
    drift
}

/// The moderate-deviation process: integrated directly in Z-variables to
/// avoid the catastrophic cancellation of (u^eps - u^0) at small eps.
pub fn solve_moderate(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    scaling: &ScalingSpec,
    inc: &WienerIncrements,
) -> Result<StatePath> {
    scaling.require_moderate()?;
    solve_controlled_inner(model, cov, u0, scaling, Some(inc), None, "moderate")
}

/// The skeleton equation: linearized dynamics forced by sigma(t, u0) hdot.
pub fn solve_skeleton(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    h: &ControlPath,
) -> Result<StatePath> {
    model.check_dimension(u0.state(0))?;
    check_noise_space(model, cov)?;
    check_grid(u0.grid(), h.grid(), "control")?;
    if cov.modes() != h.modes() {
        return Err(Error::invalid("covariance and control disagree on modes"));
    }
    let grid = u0.grid();
    let dt = grid.dt();
    let n = model.dimension();
    let res = resolvent(model, dt);
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(vec![0.0; n]);
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let x = &states[k];
        let base = u0.state(k);
        let drift = linearized_drift(model, t, base, x);
        let hdot = h.hdot_physical(cov, k);
        let force = if hdot.iter().all(|c| *c == 0.0) {
            None
        } else {
            let mut g = model.sigma(t, base, &pad(&hdot, n));
            g.iter_mut().for_each(|v| *v *= dt);
            Some(g)
        };
        let next = advance(&res, x, &drift, force.as_deref(), dt);
        check_finite(&next, k + 1, "skeleton")?;
        states.push(next);
    }
    Ok(StatePath {
        grid,
        states,
        provenance: Provenance::deterministic("skeleton"),
    })
}

/// The controlled moderate-deviation process: noise lambda^{-1} sigma dW
/// plus control forcing sigma phidot dt, both evaluated at the perturbed
/// state u0 + sqrt(eps) lambda X.
pub fn solve_controlled(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    scaling: &ScalingSpec,
    inc: &WienerIncrements,
    phi: &ControlPath,
) -> Result<StatePath> {
    scaling.require_moderate()?;
    check_grid(u0.grid(), phi.grid(), "control")?;
    if cov.modes() != phi.modes() {
        return Err(Error::invalid("covariance and control disagree on modes"));
    }
    solve_controlled_inner(model, cov, u0, scaling, Some(inc), Some(phi), "controlled")
}

fn solve_controlled_inner(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    scaling: &ScalingSpec,
    inc: Option<&WienerIncrements>,
    phi: Option<&ControlPath>,
    equation: &str,
) -> Result<StatePath> {
    model.check_dimension(u0.state(0))?;
    check_noise_space(model, cov)?;
    let grid = u0.grid();
    if let Some(inc) = inc {
        check_grid(grid, inc.grid(), "increments")?;
        if cov.modes() != inc.modes() {
            return Err(Error::invalid(
                "covariance and increments disagree on modes",
            ));
        }
    }
    let dt = grid.dt();
    let n = model.dimension();
    let res = resolvent(model, dt);
    let sl = scaling.sqrt_eps_lambda();
    let inv_lambda = 1.0 / scaling.lambda;
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(vec![0.0; n]);
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let z = &states[k];
        let base = u0.state(k);
        // perturbed state u0 + sqrt(eps) lambda Z
        let mut pert = base.to_vec();
        state::axpy(&mut pert, sl, z);

        let mut drift = vec![0.0; n];
        if !model.bilinear_is_zero() {
            let b1 = model.bilinear(z, &pert);
            let b2 = model.bilinear(base, z);
            for ((d, x), y) in drift.iter_mut().zip(&b1).zip(&b2) {
                *d += x + y;
            }
        }
        // (sqrt(eps) lambda)^{-1} [R(t, pert) - R(t, u0)]
        let r_pert = model.reaction(t, &pert);
        let r_base = model.reaction(t, base);
        for ((d, rp), rb) in drift.iter_mut().zip(&r_pert).zip(&r_base) {
            *d += (rp - rb) / sl;
        }
        drift.iter_mut().for_each(|d| *d = -*d);

        let mut force = vec![0.0; n];
        let mut has_force = false;
        if let Some(inc) = inc {
            let g = model.sigma(t, &pert, &pad(inc.step(k), n));
            state::axpy(&mut force, inv_lambda, &g);
            has_force = true;
        }
        if let Some(phi) = phi {
            let hdot = phi.hdot_physical(cov, k);
            if hdot.iter().any(|c| *c != 0.0) {
                let g = model.sigma(t, &pert, &pad(&hdot, n));
                state::axpy(&mut force, dt, &g);
                has_force = true;
            }
        }
        let next = advance(
            &res,
            z,
            &drift,
            if has_force { Some(&force[..]) } else { None },
            dt,
        );
        check_finite(&next, k + 1, equation)?;
        states.push(next);
    }
    Ok(StatePath {
        grid,
        states,
        provenance: Provenance::stochastic(equation, Some(scaling), inc.map_or(0, |i| i.seed())),
    })
}

/// Largest relative defect of the identity u0 + sqrt(eps) lambda Z = u_eps
/// over all nodes; the two discretizations are algebraically identical.
pub fn reconstruction_defect(
    u0: &StatePath,
    z: &StatePath,
    u_eps: &StatePath,
    scaling: &ScalingSpec,
) -> f64 {
    let sl = scaling.sqrt_eps_lambda();
    let recon = u0.linear_combination(1.0, z, sl);
    let mut worst: f64 = 0.0;
    for k in 0..recon.len() {
        let r = recon.state(k);
        let u = u_eps.state(k);
        let num: f64 = r
            .iter()
            .zip(u)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = 1.0 + state::h_norm(u);
        worst = worst.max(num / den);
    }
    worst
}

/// Strong self-convergence of a solver under dyadic refinement; the coarse
/// increments are block sums of the finest ones and the finest path is the
/// reference.
#[derive(Debug, Clone, Serialize)]
pub struct SelfConvergenceReport {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_order: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceSolver {
    Deterministic,
    Sde,
}

#[allow(clippy::too_many_arguments)]
pub fn self_convergence(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    t_end: f64,
    finest_log2: u32,
    coarse_log2: &[u32],
    scaling: &ScalingSpec,
    solver: ConvergenceSolver,
    n_rep: usize,
    seed: u64,
) -> Result<SelfConvergenceReport> {
    if coarse_log2.len() < 3 {
        return Err(Error::invalid("need at least 3 refinement levels"));
    }
    if coarse_log2.iter().any(|l| *l >= finest_log2) {
        return Err(Error::invalid(
            "coarse levels must be strictly coarser than the finest",
        ));
    }
    let fine_grid = TimeGrid::new(t_end, 1 << finest_log2)?;
    let replicas = match solver {
        ConvergenceSolver::Deterministic => 1,
        ConvergenceSolver::Sde => n_rep.max(1),
    };
    let mut sq_errors = vec![0.0; coarse_log2.len()];
    for r in 0..replicas {
        let inc = crate::stochastics::sample_increments(
            cov,
            fine_grid,
            crate::rng::replica_key(seed, r as u64),
        );
        let reference = run_level(model, cov, xi, scaling, solver, &inc)?;
        for (li, lvl) in coarse_log2.iter().enumerate() {
            let factor = 1usize << (finest_log2 - lvl);
            let coarse_inc = inc.coarsen(factor)?;
            let path = run_level(model, cov, xi, scaling, solver, &coarse_inc)?;
            // sup over shared nodes
            let mut sup = 0.0f64;
            for k in 0..path.len() {
                let a = path.state(k);
                let b = reference.state(k * factor);
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                sup = sup.max(d);
            }
            sq_errors[li] += sup / replicas as f64;
        }
    }
    let dts: Vec<f64> = coarse_log2
        .iter()
        .map(|l| t_end / (1u64 << l) as f64)
        .collect();
    let errors: Vec<f64> = sq_errors.iter().map(|e| e.sqrt()).collect();
    let fitted_order = crate::stats::log_log_slope(&dts, &errors).unwrap_or(f64::NAN);
    // errors listed from coarse to fine when levels increase
    let monotone = errors.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(SelfConvergenceReport {
        dts,
        errors,
        fitted_order,
        monotone,
    })
}

fn run_level(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    xi: &StateVector,
    scaling: &ScalingSpec,
    solver: ConvergenceSolver,
    inc: &WienerIncrements,
) -> Result<StatePath> {
    match solver {
        ConvergenceSolver::Deterministic => solve_deterministic(model, xi, inc.grid()),
        ConvergenceSolver::Sde => solve_sde(model, cov, xi, inc.grid(), scaling, inc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        make_linear_ou, make_shell_model, LinearOuParams, ShellNoise, ShellParams, ShellReaction,
    };
    use crate::stochastics::sample_increments;

    fn ou_model() -> ModelSpec {
        make_linear_ou(&LinearOuParams::default()).unwrap()
    }

    fn quiet_shell() -> ModelSpec {
        let mut p = ShellParams::default();
        p.n_shells = 8;
        p.viscosity = 0.05;
        p.reaction = ShellReaction::Zero;
        p.noise = ShellNoise::Zero;
        make_shell_model(&p).unwrap()
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let m = quiet_shell();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let path = solve_deterministic(&m, &StateVector::zeros(8), grid).unwrap();
        assert_eq!(path.terminal(), vec![0.0; 8].as_slice());
    }

    #[test]
    fn scalar_ou_decays_exponentially() {
        let m = ou_model();
        let grid = TimeGrid::new(1.0, 4096).unwrap();
        let xi = StateVector::new(vec![1.0]).unwrap();
        let path = solve_deterministic(&m, &xi, grid).unwrap();
        let expect = (-1.0f64).exp();
        assert!((path.terminal()[0] - expect).abs() < 2e-4);
    }

    #[test]
    fn eps_zero_sde_is_bitwise_deterministic() {
        let m = ou_model();
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let xi = StateVector::new(vec![0.7]).unwrap();
        let inc = sample_increments(&cov, grid, 5);
        let det = solve_deterministic(&m, &xi, grid).unwrap();
        let sde = solve_sde(&m, &cov, &xi, grid, &ScalingSpec::clt(0.0).unwrap(), &inc).unwrap();
        for k in 0..det.len() {
            assert_eq!(det.state(k), sde.state(k));
        }
    }

    #[test]
    fn same_seed_gives_identical_paths() {
        let m = ou_model();
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let xi = StateVector::new(vec![0.7]).unwrap();
        let s = ScalingSpec::clt(0.01).unwrap();
        let a = solve_sde(&m, &cov, &xi, grid, &s, &sample_increments(&cov, grid, 9)).unwrap();
        let b = solve_sde(&m, &cov, &xi, grid, &s, &sample_increments(&cov, grid, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shell_semi_implicit_energy_never_grows() {
        // sigma = 0, R = 0: per-step |u| is non-increasing on this grid
        let m = quiet_shell();
        let grid = TimeGrid::new(1.0, 2048).unwrap();
        let mut xi = vec![0.0; 8];
        xi[0] = 0.8;
        xi[1] = 0.6;
        let path = solve_deterministic(&m, &StateVector::new(xi).unwrap(), grid).unwrap();
        for k in 0..grid.steps() {
            let a = state::dot(path.state(k), path.state(k));
            let b = state::dot(path.state(k + 1), path.state(k + 1));
            assert!(b <= a * (1.0 + 1e-12), "step {k}: {b} > {a}");
        }
    }

    #[test]
    fn linearized_is_linear_in_increments() {
        let m = quiet_shell_with_noise();
        let cov = CovarianceSpec::power_law(8, 2.0);
        let grid = TimeGrid::new(0.5, 256).unwrap();
        let mut xi = vec![0.0; 8];
        xi[0] = 1.0;
        xi[1] = 0.5;
        let u0 = solve_deterministic(&m, &StateVector::new(xi).unwrap(), grid).unwrap();
        let i1 = sample_increments(&cov, grid, 1);
        let i2 = sample_increments(&cov, grid, 2);
        let mut sum = i1.clone();
        for k in 0..grid.steps() {
            let add = i2.step(k).to_vec();
            for (a, b) in sum.step_mut(k).iter_mut().zip(&add) {
                *a += b;
            }
        }
        let v1 = solve_linearized(&m, &cov, &u0, &i1).unwrap();
        let v2 = solve_linearized(&m, &cov, &u0, &i2).unwrap();
        let v12 = solve_linearized(&m, &cov, &u0, &sum).unwrap();
        let combo = v1.linear_combination(1.0, &v2, 1.0);
        let scale = 1.0 + v12.sup_h_sq().sqrt();
        assert!(v12.sup_dist_sq(&combo).sqrt() / scale < 1e-10);

        // zero increments give the zero path
        let z = solve_linearized(&m, &cov, &u0, &WienerIncrements::zeros(grid, 8)).unwrap();
        assert_eq!(z.sup_h_sq(), 0.0);
    }

    fn quiet_shell_with_noise() -> ModelSpec {
        let mut p = ShellParams::default();
        p.n_shells = 8;
        p.viscosity = 0.05;
        p.reaction = ShellReaction::Damping { rho: 0.1 };
        p.noise = ShellNoise::Multiplicative {
            floor: 0.5,
            gain: 0.5,
            time_modulated: true,
        };
        make_shell_model(&p).unwrap()
    }

    #[test]
    fn skeleton_is_homogeneous_in_the_control() {
        let m = quiet_shell_with_noise();
        let cov = CovarianceSpec::power_law(8, 2.0);
        let grid = TimeGrid::new(0.5, 128).unwrap();
        let mut xi = vec![0.0; 8];
        xi[0] = 1.0;
        let u0 = solve_deterministic(&m, &StateVector::new(xi).unwrap(), grid).unwrap();
        let h = ControlPath::constant(grid, 8, 0, 0.8).unwrap();
        let x1 = solve_skeleton(&m, &cov, &u0, &h).unwrap();
        let x3 = solve_skeleton(&m, &cov, &u0, &h.scale(3.0)).unwrap();
        let scaled = x1.linear_combination(3.0, &x1, 0.0);
        assert!(x3.sup_dist_sq(&scaled).sqrt() <= 1e-12 * (1.0 + x3.sup_h_sq().sqrt()));

        let zero = solve_skeleton(&m, &cov, &u0, &ControlPath::zeros(grid, 8)).unwrap();
        assert_eq!(zero.sup_h_sq(), 0.0);
    }

    #[test]
    fn moderate_reconstruction_identity_on_shell() {
        let m = quiet_shell_with_noise();
        let cov = CovarianceSpec::power_law(8, 2.0);
        let grid = TimeGrid::new(0.5, 512).unwrap();
        let mut xi = vec![0.0; 8];
        xi[0] = 1.0;
        let xi = StateVector::new(xi).unwrap();
        let u0 = solve_deterministic(&m, &xi, grid).unwrap();
        let scaling = ScalingSpec::mdp(1e-3, 0.25).unwrap();
        let inc = sample_increments(&cov, grid, 33);
        let z = solve_moderate(&m, &cov, &u0, &scaling, &inc).unwrap();
        let u_eps = solve_sde(&m, &cov, &xi, grid, &scaling, &inc).unwrap();
        let defect = reconstruction_defect(&u0, &z, &u_eps, &scaling);
        assert!(defect <= 1e-8, "defect = {defect}");

        // zero increments collapse Z to zero
        let z0 =
            solve_moderate(&m, &cov, &u0, &scaling, &WienerIncrements::zeros(grid, 8)).unwrap();
        assert_eq!(z0.sup_h_sq(), 0.0);
    }

    #[test]
    fn controlled_with_zero_control_is_moderate() {
        let m = quiet_shell_with_noise();
        let cov = CovarianceSpec::power_law(8, 2.0);
        let grid = TimeGrid::new(0.5, 128).unwrap();
        let mut xi = vec![0.0; 8];
        xi[0] = 1.0;
        let u0 = solve_deterministic(&m, &StateVector::new(xi).unwrap(), grid).unwrap();
        let scaling = ScalingSpec::mdp(1e-2, 0.25).unwrap();
        let inc = sample_increments(&cov, grid, 4);
        let a = solve_moderate(&m, &cov, &u0, &scaling, &inc).unwrap();
        let b =
            solve_controlled(&m, &cov, &u0, &scaling, &inc, &ControlPath::zeros(grid, 8)).unwrap();
        for k in 0..a.len() {
            assert_eq!(a.state(k), b.state(k));
        }
    }

    #[test]
    fn scaling_regime_is_enforced() {
        assert!(ScalingSpec::mdp(0.5, 0.6).is_err());
        let s = ScalingSpec {
            eps: 0.5,
            lambda: 2.0,
        };
        assert!(s.require_moderate().is_err());
    }

    #[test]
    fn ou_skeleton_matches_scalar_ode_oracle() {
        // constant hdot = 1 on the single mode with sigma = s, q:
        // X(T) = s sqrt(q) (1 - e^{-T}) for drift rate 1
        let m = ou_model();
        let cov = CovarianceSpec::uniform(1, 0.25).unwrap();
        let grid = TimeGrid::new(1.0, 8192).unwrap();
        let u0 = solve_deterministic(&m, &StateVector::zeros(1), grid).unwrap();
        let h = ControlPath::constant(grid, 1, 0, 1.0).unwrap();
        let x = solve_skeleton(&m, &cov, &u0, &h).unwrap();
        let expect = 0.5 * (1.0 - (-1.0f64).exp());
        assert!(
            (x.terminal()[0] - expect).abs() < 1e-4,
            "{}",
            x.terminal()[0]
        );
    }
}
