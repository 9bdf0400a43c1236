//! Empirical moment audits mirroring the a-priori bounds: sup moments,
//! energy integrals, weighted energy and the fourth interpolation moment,
//! uniform over an eps sweep.

use crate::error::{Error, Result};
use crate::integrators::StatePath;
use crate::model::ModelSpec;
use crate::stats;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub p: u32,
    pub paths: usize,
    /// E sup_t |u|^{2p}
    pub sup_moment: f64,
    /// E int ||u||^2 dt
    pub int_v_sq: f64,
    /// E int |u|^{2p-2} ||u||^2 dt
    pub int_weighted: f64,
    /// E int ||u||_H^4 dt
    pub int_interp4: f64,
}

pub fn moment_audit(model: &ModelSpec, paths: &[StatePath], p: u32) -> Result<MomentReport> {
    if !(p == 1 || p == 2) {
        return Err(Error::invalid("p must be 1 or 2"));
    }
    if paths.is_empty() {
        return Ok(MomentReport {
            p,
            paths: 0,
            sup_moment: 0.0,
            int_v_sq: 0.0,
            int_weighted: 0.0,
            int_interp4: 0.0,
        });
    }
    let sup: Vec<f64> = paths
        .iter()
        .map(|path| path.sup_h_sq().powi(p as i32))
        .collect();
    let int_v: Vec<f64> = paths.iter().map(|path| path.int_v_sq(model)).collect();
    let weighted: Vec<f64> = paths
        .iter()
        .map(|path| path.int_weighted_v_sq(model, p))
        .collect();
    let interp4: Vec<f64> = paths.iter().map(|path| path.int_interp4(model)).collect();
    Ok(MomentReport {
        p,
        paths: paths.len(),
        sup_moment: stats::mean_se(&sup).0,
        int_v_sq: stats::mean_se(&int_v).0,
        int_weighted: stats::mean_se(&weighted).0,
        int_interp4: stats::mean_se(&interp4).0,
    })
}

/// True when no moment grows beyond `factor` times its value at the largest
/// eps (the first report); the uniform-boundedness check of an eps sweep.
pub fn uniformly_bounded(reports: &[(f64, MomentReport)], factor: f64) -> bool {
    if reports.is_empty() {
        return true;
    }
    let head = &reports[0].1;
    reports.iter().all(|(_, r)| {
        r.sup_moment <= factor * head.sup_moment.max(1e-300)
            && r.int_v_sq <= factor * head.int_v_sq.max(1e-300)
            && r.int_weighted <= factor * head.int_weighted.max(1e-300)
            && r.int_interp4 <= factor * head.int_interp4.max(1e-300)
    })
}
