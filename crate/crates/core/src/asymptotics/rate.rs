//! Variational rate-function solver for terminal half-space events.
//!
//! The skeleton dynamics are affine in the control, so the penalized
//! objective J(h) = action(h) + (beta/2) (Phi(X^h) - target)^2 is a strictly
//! convex quadratic in the control coefficients. The solver assembles the
//! per-step dense operators of the discrete time-stepping once (discretize
//! then optimize), computes the sensitivity of the terminal functional by
//! one adjoint sweep through the exact transposes, and minimizes J by
//! conjugate gradients, whose residual coincides with the gradient of J.
//! A beta sweep with two-point extrapolation removes the O(1/beta)
//! constraint-violation bias from the reported action.

use crate::error::{Error, Result};
use crate::integrators::{solve_skeleton, StatePath};
use crate::model::ModelSpec;
use crate::stochastics::{action, ControlPath, CovarianceSpec};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RateConfig {
    /// Index of the unit probe e in Phi(X) = <e, X(T)>.
    pub probe_index: usize,
    pub target: f64,
    /// Penalty weights, increasing; the last one yields the returned control.
    pub betas: Vec<f64>,
    /// Gradient norm at which CG stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            probe_index: 0,
            target: 1.0,
            betas: vec![1e2, 1e3, 1e4],
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub action_value: f64,
    pub terminal_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSolution {
    #[serde(skip)]
    pub control: ControlPath,
    #[serde(skip)]
    pub skeleton: StatePath,
    /// Action of the control at the largest beta.
    pub action_value: f64,
    /// Phi(X^h) - target at the largest beta.
    pub terminal_residual: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub beta_sweep: Vec<BetaPoint>,
    /// Two-point extrapolation of the action over the beta sweep.
    pub extrapolated_action: f64,
}

/// The discrete affine control-to-state map with its exact transpose.
pub struct RateOperator {
    steps: usize,
    dim: usize,
    modes: usize,
    dt: f64,
    resolvent: Vec<f64>,
    /// Per-step drift matrices M_k (n x n, row-major): x' = M_k x.
    drift: Vec<Vec<f64>>,
    /// Per-step forcing matrices Sig_k (n x m): columns sigma(t_k, u0_k) sqrt(q_j) e_j.
    forcing: Vec<Vec<f64>>,
    /// Sensitivity g of Phi(X^h) w.r.t. the control coefficients.
    sensitivity: Vec<f64>,
    probe_index: usize,
}

impl RateOperator {
    /// Assembles the per-step operators along u0 and runs the adjoint sweep
    /// for the terminal probe.
    pub fn build(
        model: &ModelSpec,
        cov: &CovarianceSpec,
        u0: &StatePath,
        probe_index: usize,
    ) -> Result<RateOperator> {
        let n = model.dimension();
        if probe_index >= n {
            return Err(Error::invalid(format!(
                "probe index {probe_index} out of range for dimension {n}"
            )));
        }
        model.check_dimension(u0.state(0))?;
        if cov.modes() > n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cov.modes(),
            });
        }
        let grid = u0.grid();
        let steps = grid.steps();
        let dt = grid.dt();
        let m = cov.modes();
        let resolvent: Vec<f64> = model
            .a_spectrum()
            .iter()
            .map(|a| 1.0 / (1.0 + dt * a))
            .collect();
        let sqrt_q: Vec<f64> = cov.eigenvalues().iter().map(|q| q.sqrt()).collect();

        let mut drift = Vec::with_capacity(steps);
        let mut forcing = Vec::with_capacity(steps);
        let mut basis = vec![0.0; n];
        for k in 0..steps {
            let t = grid.node(k);
            let base = u0.state(k);
            let mut mk = vec![0.0; n * n];
            for i in 0..n {
                basis[i] = 1.0;
                let col = linearized_drift_column(model, t, base, &basis);
                basis[i] = 0.0;
                for (row, v) in col.iter().enumerate() {
                    mk[row * n + i] = *v;
                }
            }
            drift.push(mk);

            let mut sk = vec![0.0; n * m];
            let mut e = vec![0.0; n];
            for (j, sq) in sqrt_q.iter().enumerate() {
                if *sq == 0.0 {
                    continue;
                }
                e[j] = *sq;
                let col = model.sigma(t, base, &e);
                e[j] = 0.0;
                for (row, v) in col.iter().enumerate() {
                    sk[row * m + j] = *v;
                }
            }
            forcing.push(sk);
        }

        let mut op = RateOperator {
            steps,
            dim: n,
            modes: m,
            dt,
            resolvent,
            drift,
            forcing,
            sensitivity: Vec::new(),
            probe_index,
        };
        op.sensitivity = op.adjoint_sensitivity();
        Ok(op)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sensitivity(&self) -> &[f64] {
        &self.sensitivity
    }

    /// Forward map: terminal functional of the controlled state.
    pub fn phi(&self, coeffs: &[f64]) -> f64 {
        assert_eq!(coeffs.len(), self.steps * self.modes);
        let n = self.dim;
        let mut x = vec![0.0; n];
        let mut next = vec![0.0; n];
        for k in 0..self.steps {
            let mk = &self.drift[k];
            let sk = &self.forcing[k];
            let c = &coeffs[k * self.modes..(k + 1) * self.modes];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += mk[i * n + j] * x[j];
                }
                let mut f = 0.0;
                for j in 0..self.modes {
                    f += sk[i * self.modes + j] * c[j];
                }
                next[i] = self.resolvent[i] * (x[i] + self.dt * (acc + f));
            }
            std::mem::swap(&mut x, &mut next);
        }
        x[self.probe_index]
    }

    /// One adjoint sweep: the gradient of phi in the control coefficients.
    fn adjoint_sensitivity(&self) -> Vec<f64> {
        let n = self.dim;
        let mut p = vec![0.0; n];
        p[self.probe_index] = 1.0;
        let mut g = vec![0.0; self.steps * self.modes];
        for k in (0..self.steps).rev() {
            // w = D p   (resolvent is diagonal, self-adjoint)
            let w: Vec<f64> = p.iter().zip(&self.resolvent).map(|(x, r)| x * r).collect();
            let sk = &self.forcing[k];
            for j in 0..self.modes {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += sk[i * self.modes + j] * w[i];
                }
                g[k * self.modes + j] = self.dt * acc;
            }
            // p_k = w + dt M_k^T w
            let mk = &self.drift[k];
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += mk[i * n + j] * w[i];
                }
                p[j] = w[j] + self.dt * acc;
            }
        }
        g
    }

    /// J(h) = (dt/2)|c|^2 + (beta/2)(phi - target)^2.
    pub fn objective(&self, coeffs: &[f64], beta: f64, target: f64) -> f64 {
        let action: f64 = 0.5 * self.dt * coeffs.iter().map(|c| c * c).sum::<f64>();
        let miss = self.phi(coeffs) - target;
        action + 0.5 * beta * miss * miss
    }

    /// grad J = dt c + beta (phi - target) g, with g from the adjoint sweep.
    pub fn gradient(&self, coeffs: &[f64], beta: f64, target: f64) -> Vec<f64> {
        let miss = self.phi(coeffs) - target;
        coeffs
            .iter()
            .zip(&self.sensitivity)
            .map(|(c, gi)| self.dt * c + beta * miss * gi)
            .collect()
    }

    /// Minimizes J at one beta by CG on (dt I + beta g g^T) c = beta target g.
    /// Returns (coefficients, iterations, gradient norm).
    fn minimize(
        &self,
        beta: f64,
        target: f64,
        tol: f64,
        max_iter: usize,
    ) -> (Vec<f64>, usize, f64) {
        let dim = self.steps * self.modes;
        let g = &self.sensitivity;
        let matvec = |v: &[f64]| -> Vec<f64> {
            let gv: f64 = g.iter().zip(v).map(|(a, b)| a * b).sum();
            g.iter()
                .zip(v)
                .map(|(gi, vi)| self.dt * vi + beta * gv * gi)
                .collect()
        };
        let b: Vec<f64> = g.iter().map(|gi| beta * target * gi).collect();
        let mut x = vec![0.0; dim];
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rs: f64 = r.iter().map(|v| v * v).sum();
        let mut iterations = 0;
        while rs.sqrt() > tol && iterations < max_iter {
            let ap = matvec(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rs / pap;
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += alpha * pi;
            }
            for (ri, api) in r.iter_mut().zip(&ap) {
                *ri -= alpha * api;
            }
            let rs_new: f64 = r.iter().map(|v| v * v).sum();
            let beta_cg = rs_new / rs;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta_cg * *pi;
            }
            rs = rs_new;
            iterations += 1;
        }
        (x, iterations, rs.sqrt())
    }
}

fn linearized_drift_column(model: &ModelSpec, t: f64, u0: &[f64], v: &[f64]) -> Vec<f64> {
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

/// Minimizes the penalized control energy for a terminal half-space target
/// along the beta sweep, returning the control at the largest beta and the
/// extrapolated constrained action.
pub fn rate_function(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    u0: &StatePath,
    cfg: &RateConfig,
) -> Result<RateSolution> {
    if cfg.betas.is_empty() {
        return Err(Error::invalid("beta sweep must not be empty"));
    }
    if cfg.betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("beta sweep must be strictly increasing"));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let op = RateOperator::build(model, cov, u0, cfg.probe_index)?;

    let mut beta_sweep = Vec::with_capacity(cfg.betas.len());
    let mut final_coeffs = Vec::new();
    let mut iterations = 0;
    let mut grad_norm = 0.0;
    for beta in &cfg.betas {
        let (coeffs, iters, gnorm) = op.minimize(*beta, cfg.target, cfg.tol, cfg.max_iter);
        let action_value = 0.5 * op.dt() * coeffs.iter().map(|c| c * c).sum::<f64>();
        let terminal_residual = op.phi(&coeffs) - cfg.target;
        beta_sweep.push(BetaPoint {
            beta: *beta,
            action_value,
            terminal_residual,
        });
        final_coeffs = coeffs;
        iterations = iters;
        grad_norm = gnorm;
    }
    let converged = grad_norm <= cfg.tol;

    let extrapolated_action = if beta_sweep.len() >= 2 {
        let a = &beta_sweep[beta_sweep.len() - 2];
        let b = &beta_sweep[beta_sweep.len() - 1];
        (b.beta * b.action_value - a.beta * a.action_value) / (b.beta - a.beta)
    } else {
        beta_sweep[0].action_value
    };

    let control = ControlPath::new(u0.grid(), op.modes(), final_coeffs)?;
    let skeleton = solve_skeleton(model, cov, u0, &control)?;
    let action_value = action(&control);
    let terminal_residual = skeleton.terminal()[cfg.probe_index] - cfg.target;
    Ok(RateSolution {
        control,
        skeleton,
        action_value,
        terminal_residual,
        iterations,
        grad_norm,
        converged,
        beta_sweep,
        extrapolated_action,
    })
}
