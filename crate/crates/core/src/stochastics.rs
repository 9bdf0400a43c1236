//! Trace-class Q-Wiener increments, Cameron-Martin controls and the action
//! functional.
//!
//! Controls are stored in Q^{1/2}-coordinates: the derivative of the control
//! at node k is hdot(t_k) = sum_j c_{k,j} sqrt(q_j) e_j, so the H_0 norm of
//! hdot is the plain Euclidean norm of the coefficient row. Wiener
//! increments are stored in physical H-coordinates with per-mode variance
//! q_j * dt.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Eigenvalues of the covariance operator Q in the model basis. The noise
/// acts on the first `q.len()` model coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    q: Vec<f64>,
}

impl CovarianceSpec {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        for (j, v) in q.iter().enumerate() {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "covariance eigenvalue q[{j}] must be nonnegative, got {v}"
                )));
            }
        }
        Ok(CovarianceSpec { q })
    }

    /// q_j = (j + 1)^{-exponent}, j = 0..m-1. The default choice is
    /// exponent = 2.
    pub fn power_law(modes: usize, exponent: f64) -> Self {
        CovarianceSpec {
            q: (1..=modes).map(|j| (j as f64).powf(-exponent)).collect(),
        }
    }

    pub fn uniform(modes: usize, value: f64) -> Result<Self> {
        CovarianceSpec::new(vec![value; modes])
    }

    pub fn modes(&self) -> usize {
        self.q.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.q
    }

    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Uniform grid on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be positive, got {t_end}"
            )));
        }
        if steps == 0 {
            return Err(Error::invalid("steps must be at least 1"));
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// Seeded Gaussian increments of the Q-Wiener process on a grid.
/// Row-major (steps x modes); entry (k, j) has law N(0, q_j dt).
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    grid: TimeGrid,
    modes: usize,
    seed: u64,
    increments: Vec<f64>,
}

/// i.i.d. draws dW_{k,j} ~ N(0, q_j dt), a pure function of the seed.
/// Per-replica streams are obtained by passing `rng::replica_key(base, r)`
/// as the seed.
pub fn sample_increments(cov: &CovarianceSpec, grid: TimeGrid, seed: u64) -> WienerIncrements {
    let m = cov.modes();
    let dt = grid.dt();
    let sqrt_qdt: Vec<f64> = cov.eigenvalues().iter().map(|q| (q * dt).sqrt()).collect();
    let mut increments = vec![0.0; grid.steps() * m];
    for k in 0..grid.steps() {
        for j in 0..m {
            let ctr = (k * m + j) as u64;
            increments[k * m + j] = rng::standard_normal(seed, ctr) * sqrt_qdt[j];
        }
    }
    WienerIncrements {
        grid,
        modes: m,
        seed,
        increments,
    }
}

impl WienerIncrements {
    pub fn zeros(grid: TimeGrid, modes: usize) -> Self {
        WienerIncrements {
            grid,
            modes,
            seed: 0,
            increments: vec![0.0; grid.steps() * modes],
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Increment row for step k, physical H-coordinates.
    pub fn step(&self, k: usize) -> &[f64] {
        &self.increments[k * self.modes..(k + 1) * self.modes]
    }

    pub fn step_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.increments[k * self.modes..(k + 1) * self.modes]
    }

    /// Sums blocks of `factor` fine increments into one coarse increment.
    pub fn coarsen(&self, factor: usize) -> Result<WienerIncrements> {
        if factor == 0 || !self.grid.steps().is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "cannot coarsen {} steps by factor {factor}",
                self.grid.steps()
            )));
        }
        let coarse_steps = self.grid.steps() / factor;
        let grid = TimeGrid::new(self.grid.t_end(), coarse_steps)?;
        let mut out = WienerIncrements::zeros(grid, self.modes);
        out.seed = self.seed;
        for k in 0..coarse_steps {
            for f in 0..factor {
                let fine = self.step(k * factor + f).to_vec();
                for (o, x) in out.step_mut(k).iter_mut().zip(&fine) {
                    *o += x;
                }
            }
        }
        Ok(out)
    }

    /// Adds `shift(t_k) * dt` to every increment row; used for the Girsanov
    /// tilt in importance sampling.
    pub fn shifted(&self, shift: impl Fn(usize) -> Vec<f64>) -> WienerIncrements {
        let mut out = self.clone();
        let dt = self.grid.dt();
        for k in 0..self.grid.steps() {
            let s = shift(k);
            for (o, x) in out.step_mut(k).iter_mut().zip(&s) {
                *o += x * dt;
            }
        }
        out
    }
}

/// A discretized Cameron-Martin control in Q^{1/2}-coordinates.
/// Row-major (steps x modes); hdot is piecewise constant on the grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    grid: TimeGrid,
    modes: usize,
    coeffs: Vec<f64>,
}

impl ControlPath {
    pub fn new(grid: TimeGrid, modes: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.steps() * modes {
            return Err(Error::invalid(format!(
                "control needs {} coefficients, got {}",
                grid.steps() * modes,
                coeffs.len()
            )));
        }
        if !crate::state::all_finite(&coeffs) {
            return Err(Error::invalid("control coefficients must be finite"));
        }
        Ok(ControlPath {
            grid,
            modes,
            coeffs,
        })
    }

    pub fn zeros(grid: TimeGrid, modes: usize) -> Self {
        ControlPath {
            grid,
            modes,
            coeffs: vec![0.0; grid.steps() * modes],
        }
    }

    /// Constant control on one mode: c_{k, mode} = value for all k.
    pub fn constant(grid: TimeGrid, modes: usize, mode: usize, value: f64) -> Result<Self> {
        if mode >= modes {
            return Err(Error::invalid(format!(
                "mode {mode} out of range for {modes} noise modes"
            )));
        }
        let mut c = ControlPath::zeros(grid, modes);
        for k in 0..grid.steps() {
            c.coeffs[k * modes + mode] = value;
        }
        Ok(c)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.modes..(k + 1) * self.modes]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn scale(&self, c: f64) -> ControlPath {
        ControlPath {
            grid: self.grid,
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|x| c * x).collect(),
        }
    }

    /// Physical hdot at step k: component j is c_{k,j} sqrt(q_j).
    pub fn hdot_physical(&self, cov: &CovarianceSpec, k: usize) -> Vec<f64> {
        self.step(k)
            .iter()
            .zip(cov.eigenvalues())
            .map(|(c, q)| c * q.sqrt())
            .collect()
    }
}

/// The action (1/2) int_0^T |hdot|_0^2 dt by left-endpoint quadrature.
pub fn action(h: &ControlPath) -> f64 {
    let dt = h.grid().dt();
    0.5 * dt * h.coeffs().iter().map(|c| c * c).sum::<f64>()
}

/// Radial projection onto the ball int |hdot|_0^2 <= N.
pub fn clip_to_ball(h: &ControlPath, n_ball: f64) -> Result<ControlPath> {
    if !(n_ball > 0.0) {
        return Err(Error::invalid(format!(
            "ball radius must be positive, got {n_ball}"
        )));
    }
    let energy = 2.0 * action(h);
    // the round-off slack keeps the projection idempotent at the boundary
    if energy <= n_ball * (1.0 + 1e-12) {
        Ok(h.clone())
    } else {
        Ok(h.scale((n_ball / energy).sqrt()))
    }
}

/// Applies sigma(t, u) to a noise vector given in Q^{1/2}-coordinates: the
/// physical argument is sum_j w_j sqrt(q_j) e_j. Rejects weight on modes
/// with q_j = 0.
pub fn apply_noise_operator(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    t: f64,
    u: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    model.check_dimension(u)?;
    if w.len() != cov.modes() {
        return Err(Error::DimensionMismatch {
            expected: cov.modes(),
            got: w.len(),
        });
    }
    let mut phys = vec![0.0; model.dimension()];
    for (j, (wj, qj)) in w.iter().zip(cov.eigenvalues()).enumerate() {
        if *qj == 0.0 {
            if *wj != 0.0 {
                return Err(Error::invalid(format!(
                    "mode {j} has q = 0 but nonzero noise coordinate"
                )));
            }
        } else {
            phys[j] = wj * qj.sqrt();
        }
    }
    Ok(model.sigma(t, u, &phys))
}

/// |sigma(t,u)|_{L_Q} = (sum_j q_j |sigma e_j|^2)^{1/2}.
pub fn lq_norm(model: &ModelSpec, cov: &CovarianceSpec, t: f64, u: &[f64]) -> f64 {
    let n = model.dimension();
    let mut total = 0.0;
    let mut e = vec![0.0; n];
    for (j, q) in cov.eigenvalues().iter().enumerate() {
        if *q == 0.0 || j >= n {
            continue;
        }
        e[j] = 1.0;
        let col = model.sigma(t, u, &e);
        e[j] = 0.0;
        total += q * crate::state::dot(&col, &col);
    }
    total.sqrt()
}

/// Same but for the difference sigma(t1,u1) - sigma(t2,u2).
pub fn lq_norm_diff(
    model: &ModelSpec,
    cov: &CovarianceSpec,
    t1: f64,
    u1: &[f64],
    t2: f64,
    u2: &[f64],
) -> f64 {
    let n = model.dimension();
    let mut total = 0.0;
    let mut e = vec![0.0; n];
    for (j, q) in cov.eigenvalues().iter().enumerate() {
        if *q == 0.0 || j >= n {
            continue;
        }
        e[j] = 1.0;
        let c1 = model.sigma(t1, u1, &e);
        let c2 = model.sigma(t2, u2, &e);
        e[j] = 0.0;
        total += q * c1
            .iter()
            .zip(&c2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    total.sqrt()
}

// --- flat binary and CSV layouts -------------------------------------------
//
// Header: t_end (f64 LE), steps (u64 LE), modes (u64 LE), seed (u64 LE);
// then the row-major payload as f64 LE.

fn write_header(
    w: &mut impl Write,
    t_end: f64,
    steps: u64,
    modes: u64,
    seed: u64,
) -> std::io::Result<()> {
    w.write_all(&t_end.to_le_bytes())?;
    w.write_all(&steps.to_le_bytes())?;
    w.write_all(&modes.to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())
}

fn read_header(r: &mut impl Read) -> std::io::Result<(f64, u64, u64, u64)> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let t_end = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let steps = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let modes = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    Ok((t_end, steps, modes, seed))
}

fn write_payload(w: &mut impl Write, data: &[f64]) -> std::io::Result<()> {
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_payload(r: &mut impl Read, len: usize) -> std::io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut b8 = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        out.push(f64::from_le_bytes(b8));
    }
    Ok(out)
}

impl WienerIncrements {
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        write_header(
            w,
            self.grid.t_end(),
            self.grid.steps() as u64,
            self.modes as u64,
            self.seed,
        )?;
        write_payload(w, &self.increments)
    }

    pub fn read_binary(r: &mut impl Read) -> Result<WienerIncrements> {
        let (t_end, steps, modes, seed) = read_header(r)?;
        let grid = TimeGrid::new(t_end, steps as usize)?;
        let increments = read_payload(r, (steps * modes) as usize)?;
        Ok(WienerIncrements {
            grid,
            modes: modes as usize,
            seed,
            increments,
        })
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        write!(w, "t")?;
        for j in 0..self.modes {
            write!(w, ",dW{j}")?;
        }
        writeln!(w)?;
        for k in 0..self.grid.steps() {
            write!(w, "{}", fmt_f64(self.grid.node(k)))?;
            for x in self.step(k) {
                write!(w, ",{}", fmt_f64(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl ControlPath {
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        write_header(
            w,
            self.grid.t_end(),
            self.grid.steps() as u64,
            self.modes as u64,
            0,
        )?;
        write_payload(w, &self.coeffs)
    }

    pub fn read_binary(r: &mut impl Read) -> Result<ControlPath> {
        let (t_end, steps, modes, _seed) = read_header(r)?;
        let grid = TimeGrid::new(t_end, steps as usize)?;
        let coeffs = read_payload(r, (steps * modes) as usize)?;
        ControlPath::new(grid, modes as usize, coeffs)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        write!(w, "t")?;
        for j in 0..self.modes {
            write!(w, ",c{j}")?;
        }
        writeln!(w)?;
        for k in 0..self.grid.steps() {
            write!(w, "{}", fmt_f64(self.grid.node(k)))?;
            for x in self.step(k) {
                write!(w, ",{}", fmt_f64(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_covariance_gives_zero_increments() {
        let cov = CovarianceSpec::new(vec![0.0, 0.0]).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let inc = sample_increments(&cov, grid, 5);
        assert!(inc.increments.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cov = CovarianceSpec::power_law(3, 2.0);
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let a = sample_increments(&cov, grid, 11);
        let b = sample_increments(&cov, grid, 11);
        assert_eq!(a, b);
    }

    #[test]
    fn terminal_variance_matches_q_times_t() {
        // q = 1, T = 1: Var[W(T)] = 1. Independence across steps is the
        // oracle; check the sample variance over many replicas.
        let cov = CovarianceSpec::uniform(1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let replicas = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in 0..replicas {
            let inc = sample_increments(&cov, grid, crate::rng::replica_key(3, r));
            let w_t: f64 = (0..grid.steps()).map(|k| inc.step(k)[0]).sum();
            sum += w_t;
            sumsq += w_t * w_t;
        }
        let n = replicas as f64;
        let var = sumsq / n - (sum / n) * (sum / n);
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn action_examples() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(action(&ControlPath::zeros(grid, 2)), 0.0);
        let c = ControlPath::constant(grid, 2, 0, 1.0).unwrap();
        assert!((action(&c) - 0.5).abs() < 1e-15);
        let scaled = c.scale(3.0);
        assert!((action(&scaled) - 9.0 * action(&c)).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let small = ControlPath::constant(grid, 1, 0, 0.5).unwrap(); // energy 0.25
        assert_eq!(clip_to_ball(&small, 1.0).unwrap(), small);

        let big = ControlPath::constant(grid, 1, 0, 2.0).unwrap(); // energy 4
        let clipped = clip_to_ball(&big, 1.0).unwrap();
        assert!((2.0 * action(&clipped) - 1.0).abs() < 1e-12);
        // direction preserved
        let ratio = clipped.coeffs()[0] / big.coeffs()[0];
        assert!(clipped
            .coeffs()
            .iter()
            .zip(big.coeffs())
            .all(|(a, b)| (a - ratio * b).abs() < 1e-15));
        // idempotent
        let twice = clip_to_ball(&clipped, 1.0).unwrap();
        assert_eq!(twice, clipped);
    }

    #[test]
    fn noise_operator_scaling_and_errors() {
        let model = ModelSpec::builder("diag", vec![1.0, 1.0])
            .noise_coefficient(Box::new(|_, _, w| w.to_vec()))
            .build()
            .unwrap();
        let cov = CovarianceSpec::new(vec![4.0, 0.0]).unwrap();
        let u = [0.0, 0.0];
        let out = apply_noise_operator(&model, &cov, 0.0, &u, &[1.0, 0.0]).unwrap();
        assert_eq!(out, vec![2.0, 0.0]);
        assert_eq!(
            apply_noise_operator(&model, &cov, 0.0, &u, &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(apply_noise_operator(&model, &cov, 0.0, &u, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let cov = CovarianceSpec::power_law(2, 2.0);
        let grid = TimeGrid::new(1.5, 12).unwrap();
        let inc = sample_increments(&cov, grid, 77);
        let mut buf = Vec::new();
        inc.write_binary(&mut buf).unwrap();
        let back = WienerIncrements::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, inc);

        let h = ControlPath::constant(grid, 2, 1, 0.3).unwrap();
        let mut buf = Vec::new();
        h.write_binary(&mut buf).unwrap();
        let back = ControlPath::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn h0_norm_matches_direct_q_inverse_form() {
        // |hdot|_0 from coefficients vs <Q^{-1/2} hdot, Q^{-1/2} hdot>^{1/2}
        // evaluated on the physical vector, supported modes only.
        let cov = CovarianceSpec::new(vec![0.5, 0.125, 0.0]).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let h = ControlPath::new(grid, 3, vec![1.5, -2.0, 0.0]).unwrap();
        let coeff_norm: f64 = h.step(0).iter().map(|c| c * c).sum::<f64>().sqrt();
        let phys = h.hdot_physical(&cov, 0);
        let direct: f64 = phys
            .iter()
            .zip(cov.eigenvalues())
            .filter(|(_, q)| **q > 0.0)
            .map(|(x, q)| x * x / q)
            .sum::<f64>()
            .sqrt();
        assert!((coeff_norm - direct).abs() < 1e-12);
    }
}
