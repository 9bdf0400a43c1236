//! Divergence-free spectral truncation of the 2D Navier-Stokes equations on
//! the torus.
//!
//! Modes k with 0 < |k|_inf <= K are retained. Each half-plane mode carries
//! one complex amplitude phi(k) along the unit vector k_perp / |k|, so
//! incompressibility k . u_hat(k) = 0 and the reality constraint
//! u_hat(-k) = conj(u_hat(k)) hold structurally; the stored coordinates are
//! sqrt(2) (Re phi, Im phi) per half mode, which makes the coefficient
//! 2-norm equal to the (normalized) L^2 norm of the velocity field.
//!
//! B(u, v) is the Galerkin truncation of (u . grad) v computed by direct
//! convolution over retained modes and Leray-projected; the interpolation
//! norm is the discrete L^4 norm on a 4K+2 collocation grid, where the
//! quadrature of |u|^4 is exact for the retained band.

use crate::error::{Error, Result};
use crate::model::{HypothesisConstants, InterpNorm, ModelSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralNsParams {
    pub max_wavenumber: usize,
    pub viscosity: f64,
    /// Per half-mode noise gains; empty means g_j = 1 / |k_j|^2.
    #[serde(default)]
    pub noise_gains: Vec<f64>,
    /// Linear damping rate of the reaction term; zero allowed.
    pub reaction_rho: f64,
}

impl Default for SpectralNsParams {
    fn default() -> Self {
        SpectralNsParams {
            max_wavenumber: 8,
            viscosity: 1.0,
            noise_gains: Vec::new(),
            reaction_rho: 0.1,
        }
    }
}

/// Mode bookkeeping shared by the evaluators.
pub struct SpectralGeometry {
    pub max_wavenumber: i32,
    /// Half-plane representatives, sorted by |k|^2 then lexicographically.
    pub half_modes: Vec<(i32, i32)>,
    /// k_perp / |k| per half mode.
    perp: Vec<(f64, f64)>,
    /// (2K+1)^2 lookup: retained mode -> half-mode slot, or -1.
    slot_of: Vec<i32>,
    grid_points: usize,
    /// e^{i k x_a} for k in -K..=K, a in 0..grid_points.
    twiddle: Vec<Complex64>,
}

impl SpectralGeometry {
    pub fn new(max_wavenumber: usize) -> Result<Arc<SpectralGeometry>> {
        if max_wavenumber == 0 {
            return Err(Error::invalid("max_wavenumber must be at least 1"));
        }
        let k = max_wavenumber as i32;
        let mut half: Vec<(i32, i32)> = Vec::new();
        for kx in -k..=k {
            for ky in -k..=k {
                if (kx == 0 && ky == 0) || kx < 0 || (kx == 0 && ky < 0) {
                    continue;
                }
                half.push((kx, ky));
            }
        }
        half.sort_by_key(|(x, y)| (x * x + y * y, *x, *y));
        let width = (2 * k + 1) as usize;
        let mut slot_of = vec![-1_i32; width * width];
        for (j, (kx, ky)) in half.iter().enumerate() {
            slot_of[((kx + k) as usize) * width + (ky + k) as usize] = j as i32;
        }
        let perp = half
            .iter()
            .map(|(kx, ky)| {
                let norm = ((kx * kx + ky * ky) as f64).sqrt();
                (-(*ky as f64) / norm, *kx as f64 / norm)
            })
            .collect();
        let grid_points = 4 * max_wavenumber + 2;
        let mut twiddle = Vec::with_capacity((2 * max_wavenumber + 1) * grid_points);
        for kk in -k..=k {
            for a in 0..grid_points {
                let phase = std::f64::consts::TAU * kk as f64 * a as f64 / grid_points as f64;
                twiddle.push(Complex64::new(phase.cos(), phase.sin()));
            }
        }
        Ok(Arc::new(SpectralGeometry {
            max_wavenumber: k,
            half_modes: half,
            perp,
            slot_of,
            grid_points,
            twiddle,
        }))
    }

    pub fn n_half(&self) -> usize {
        self.half_modes.len()
    }

    /// Real coordinate dimension: two per half mode.
    pub fn dimension(&self) -> usize {
        2 * self.n_half()
    }

    fn retained(&self, kx: i32, ky: i32) -> bool {
        let k = self.max_wavenumber;
        (kx != 0 || ky != 0) && kx.abs() <= k && ky.abs() <= k
    }

    fn half_slot(&self, kx: i32, ky: i32) -> Option<usize> {
        if !self.retained(kx, ky) {
            return None;
        }
        let k = self.max_wavenumber;
        let width = (2 * k + 1) as usize;
        let s = self.slot_of[((kx + k) as usize) * width + (ky + k) as usize];
        if s >= 0 {
            Some(s as usize)
        } else {
            None
        }
    }

    /// phi(k) for any retained k: the half value, or minus its conjugate.
    pub fn phi(&self, coords: &[f64], kx: i32, ky: i32) -> Complex64 {
        const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
        if let Some(j) = self.half_slot(kx, ky) {
            Complex64::new(coords[2 * j] * INV_SQRT2, coords[2 * j + 1] * INV_SQRT2)
        } else if let Some(j) = self.half_slot(-kx, -ky) {
            Complex64::new(-coords[2 * j] * INV_SQRT2, coords[2 * j + 1] * INV_SQRT2)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Velocity amplitude u_hat(k) as a complex 2-vector.
    pub fn velocity(&self, coords: &[f64], kx: i32, ky: i32) -> [Complex64; 2] {
        let phi = self.phi(coords, kx, ky);
        let norm = ((kx * kx + ky * ky) as f64).sqrt();
        if norm == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let perp = (-(ky as f64) / norm, kx as f64 / norm);
        [phi * perp.0, phi * perp.1]
    }

    /// Largest |k . u_hat(k)| over retained modes; structurally zero.
    pub fn divergence_residual(&self, coords: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (kx, ky) in &self.half_modes {
            let v = self.velocity(coords, *kx, *ky);
            let d = v[0] * *kx as f64 + v[1] * *ky as f64;
            worst = worst.max(d.norm());
        }
        worst
    }

    /// Galerkin (u . grad) v with Leray projection, in coordinates.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let k = self.max_wavenumber;
        let width = (2 * k + 1) as usize;
        // dense amplitude fields over the retained square
        let mut u_hat = vec![[Complex64::new(0.0, 0.0); 2]; width * width];
        let mut v_hat = vec![[Complex64::new(0.0, 0.0); 2]; width * width];
        let mut full: Vec<(i32, i32)> = Vec::with_capacity(2 * self.n_half());
        for (kx, ky) in &self.half_modes {
            for (sx, sy) in [(*kx, *ky), (-*kx, -*ky)] {
                let idx = ((sx + k) as usize) * width + (sy + k) as usize;
                u_hat[idx] = self.velocity(u, sx, sy);
                v_hat[idx] = self.velocity(v, sx, sy);
                full.push((sx, sy));
            }
        }
        let mut out = vec![0.0; self.dimension()];
        for (j, (ox, oy)) in self.half_modes.iter().enumerate() {
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for (px, py) in &full {
                let qx = ox - px;
                let qy = oy - py;
                if !self.retained(qx, qy) {
                    continue;
                }
                let up = &u_hat[((px + k) as usize) * width + (py + k) as usize];
                let vq = &v_hat[((qx + k) as usize) * width + (qy + k) as usize];
                // i (u_hat(p) . q) v_hat(q)
                let s = (up[0] * qx as f64 + up[1] * qy as f64) * Complex64::new(0.0, 1.0);
                acc[0] += s * vq[0];
                acc[1] += s * vq[1];
            }
            // Leray projection = component along k_perp
            let perp = self.perp[j];
            let phi = acc[0] * perp.0 + acc[1] * perp.1;
            out[2 * j] = std::f64::consts::SQRT_2 * phi.re;
            out[2 * j + 1] = std::f64::consts::SQRT_2 * phi.im;
        }
        out
    }

    /// Discrete L^4 norm of the velocity field on the collocation grid,
    /// with the normalized measure dx / (2 pi)^2.
    pub fn l4_norm(&self, coords: &[f64]) -> f64 {
        let k = self.max_wavenumber;
        let width = (2 * k + 1) as usize;
        let m = self.grid_points;
        // stage 1: partial transform in y for each kx row
        let mut partial = vec![[Complex64::new(0.0, 0.0); 2]; width * m];
        let mut u_hat = vec![[Complex64::new(0.0, 0.0); 2]; width * width];
        for (kx, ky) in &self.half_modes {
            for (sx, sy) in [(*kx, *ky), (-*kx, -*ky)] {
                u_hat[((sx + k) as usize) * width + (sy + k) as usize] =
                    self.velocity(coords, sx, sy);
            }
        }
        for kx in 0..width {
            for ky in 0..width {
                let amp = &u_hat[kx * width + ky];
                if amp[0].norm_sqr() + amp[1].norm_sqr() == 0.0 {
                    continue;
                }
                let row = &self.twiddle[ky * m..(ky + 1) * m];
                for b in 0..m {
                    let t = row[b];
                    partial[kx * m + b][0] += amp[0] * t;
                    partial[kx * m + b][1] += amp[1] * t;
                }
            }
        }
        // stage 2: transform in x, accumulate |u|^4
        let mut quartic_sum = 0.0;
        for a in 0..m {
            for b in 0..m {
                let mut ux = Complex64::new(0.0, 0.0);
                let mut uy = Complex64::new(0.0, 0.0);
                for kx in 0..width {
                    let t = self.twiddle[kx * m + a];
                    ux += partial[kx * m + b][0] * t;
                    uy += partial[kx * m + b][1] * t;
                }
                let sq = ux.re * ux.re + uy.re * uy.re;
                quartic_sum += sq * sq;
            }
        }
        (quartic_sum / (m * m) as f64).powf(0.25)
    }
}

pub fn make_spectral_ns(p: &SpectralNsParams) -> Result<ModelSpec> {
    if !(p.viscosity > 0.0) {
        return Err(Error::invalid("viscosity must be positive"));
    }
    if !(p.reaction_rho >= 0.0) {
        return Err(Error::invalid("reaction_rho must be nonnegative"));
    }
    let geom = SpectralGeometry::new(p.max_wavenumber)?;
    let n_half = geom.n_half();
    let gains = if p.noise_gains.is_empty() {
        geom.half_modes
            .iter()
            .map(|(kx, ky)| 1.0 / (kx * kx + ky * ky) as f64)
            .collect::<Vec<f64>>()
    } else {
        p.noise_gains.clone()
    };
    if gains.len() != n_half {
        return Err(Error::invalid(format!(
            "need {} noise gains, got {}",
            n_half,
            gains.len()
        )));
    }
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::invalid("noise gains must be nonnegative"));
    }

    let nu = p.viscosity;
    let alpha: Vec<f64> = geom
        .half_modes
        .iter()
        .flat_map(|(kx, ky)| {
            let a = nu * (kx * kx + ky * ky) as f64;
            [a, a]
        })
        .collect();

    let geom_b = Arc::clone(&geom);
    let bilinear = Box::new(move |u: &[f64], v: &[f64]| geom_b.bilinear(u, v));

    let rho = p.reaction_rho;
    let reaction =
        Box::new(move |_t: f64, u: &[f64]| -> Vec<f64> { u.iter().map(|x| rho * x).collect() });
    let reaction_derivative = Box::new(move |_t: f64, _u: &[f64], w: &[f64]| -> Vec<f64> {
        w.iter().map(|x| rho * x).collect()
    });

    let coord_gains: Vec<f64> = gains.iter().flat_map(|g| [*g, *g]).collect();
    let gains_sigma = coord_gains.clone();
    let noise_coefficient = Box::new(move |_t: f64, _u: &[f64], w: &[f64]| -> Vec<f64> {
        w.iter().zip(&gains_sigma).map(|(x, g)| g * x).collect()
    });

    let geom_norm = Arc::clone(&geom);
    let interp = InterpNorm::Custom(Box::new(move |v: &[f64]| geom_norm.l4_norm(v)));

    let constants = ns_constants(p, &coord_gains);
    ModelSpec::builder("ns2d", alpha)
        .bilinear(bilinear)
        .reaction(reaction)
        .reaction_derivative(reaction_derivative)
        .noise_coefficient(noise_coefficient)
        .interp_norm(interp)
        .constants(constants)
        .build()
}

/// Declared constants; the interpolation constant folds the viscosity from
/// the V-norm into the Ladyzhenskaya bound, and noise bounds assume the
/// paired covariance has sup_j q_j <= 1.
fn ns_constants(p: &SpectralNsParams, coord_gains: &[f64]) -> HypothesisConstants {
    const TINY: f64 = 1e-6;
    let sum_g2: f64 = coord_gains.iter().map(|g| g * g).sum();
    HypothesisConstants {
        a0: 2.6 / p.viscosity.sqrt(),
        k0: sum_g2.max(TINY),
        k1: TINY,
        l1: TINY,
        r0: TINY,
        r1: p.reaction_rho.max(TINY),
        r_prime0: TINY,
        r_prime1: p.reaction_rho.max(TINY),
        kappa: 1.0,
        holder_c: TINY,
    }
}

/// Convenience access to the geometry for tests and initial conditions.
pub fn spectral_geometry(p: &SpectralNsParams) -> Result<Arc<SpectralGeometry>> {
    SpectralGeometry::new(p.max_wavenumber)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::dot;
    use crate::testutil;

    fn gaussian_coords(geom: &SpectralGeometry, key: u64, base: u64) -> Vec<f64> {
        testutil::gaussian_vec(geom.dimension(), key, base)
    }

    #[test]
    fn single_mode_pair_self_cancels() {
        let geom = SpectralGeometry::new(1).unwrap();
        let mut u = vec![0.0; geom.dimension()];
        u[0] = 1.3;
        u[1] = -0.4;
        let b = geom.bilinear(&u, &u);
        let resid = dot(&b, &u).abs();
        assert!(resid <= 1e-14, "resid = {resid}");
    }

    #[test]
    fn antisymmetry_against_convolution_oracle() {
        let geom = SpectralGeometry::new(4).unwrap();
        let n = geom.dimension();
        let u = gaussian_coords(&geom, 31, 0);
        let v = gaussian_coords(&geom, 31, n as u64);
        let w = gaussian_coords(&geom, 31, 2 * n as u64);

        let b_uv = geom.bilinear(&u, &v);
        let b_uw = geom.bilinear(&u, &w);
        let lhs = dot(&b_uv, &w);
        let lhs_swap = dot(&b_uw, &v);
        let scale = 1.0 + lhs.abs().max(lhs_swap.abs());
        assert!(
            (lhs + lhs_swap).abs() / scale <= 1e-12,
            "antisymmetry defect {}",
            lhs + lhs_swap
        );

        // independent convolution-sum oracle for the trilinear form
        let gu = |kx: i32, ky: i32| {
            let a = geom.velocity(&u, kx, ky);
            [(a[0].re, a[0].im), (a[1].re, a[1].im)]
        };
        let gv = |kx: i32, ky: i32| {
            let a = geom.velocity(&v, kx, ky);
            [(a[0].re, a[0].im), (a[1].re, a[1].im)]
        };
        let gw = |kx: i32, ky: i32| {
            let a = geom.velocity(&w, kx, ky);
            [(a[0].re, a[0].im), (a[1].re, a[1].im)]
        };
        let oracle = testutil::spectral_trilinear_oracle(4, &gu, &gv, &gw);
        assert!(
            (lhs - oracle).abs() / (1.0 + oracle.abs()) <= 1e-11,
            "implementation {lhs} vs oracle {oracle}"
        );
    }

    #[test]
    fn divergence_and_reality_are_structural() {
        let geom = SpectralGeometry::new(3).unwrap();
        let u = gaussian_coords(&geom, 5, 0);
        assert!(geom.divergence_residual(&u) <= 1e-12);
        // reality: u_hat(-k) = conj(u_hat(k))
        for (kx, ky) in geom.half_modes.clone() {
            let a = geom.velocity(&u, kx, ky);
            let b = geom.velocity(&u, -kx, -ky);
            assert!((a[0].conj() - b[0]).norm() <= 1e-15);
            assert!((a[1].conj() - b[1]).norm() <= 1e-15);
        }
        // B output stays divergence free
        let b = geom.bilinear(&u, &u);
        assert!(geom.divergence_residual(&b) <= 1e-12);
    }

    #[test]
    fn l2_norm_matches_parseval() {
        let geom = SpectralGeometry::new(3).unwrap();
        let u = gaussian_coords(&geom, 6, 0);
        let coord_norm_sq = dot(&u, &u);
        let mut parseval = 0.0;
        for (kx, ky) in geom.half_modes.clone() {
            for (sx, sy) in [(kx, ky), (-kx, -ky)] {
                let a = geom.velocity(&u, sx, sy);
                parseval += a[0].norm_sqr() + a[1].norm_sqr();
            }
        }
        assert!((coord_norm_sq - parseval).abs() <= 1e-10 * (1.0 + parseval));
    }

    #[test]
    fn l4_quadrature_is_exact_for_a_known_field() {
        // phi(1,0) = 1 gives u(x) = (0, 2 cos x); |u|^4 = 16 cos^4 x has
        // mean 6, so the normalized L4 norm is 6^(1/4).
        let geom = SpectralGeometry::new(1).unwrap();
        let j = geom.half_slot(1, 0).unwrap();
        let mut u = vec![0.0; geom.dimension()];
        u[2 * j] = std::f64::consts::SQRT_2;
        let l4 = geom.l4_norm(&u);
        assert!((l4 - 6.0_f64.powf(0.25)).abs() < 1e-12, "l4 = {l4}");
    }

    #[test]
    fn constructor_validates() {
        let mut p = SpectralNsParams::default();
        p.max_wavenumber = 0;
        assert!(make_spectral_ns(&p).is_err());
        let mut p = SpectralNsParams::default();
        p.viscosity = -1.0;
        assert!(make_spectral_ns(&p).is_err());
    }
}
