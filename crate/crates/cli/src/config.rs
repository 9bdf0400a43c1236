//! Experiment configuration: one TOML file per run, every field validated
//! before any compute, unknown keys rejected. CLI `--set path=value`
//! overrides are applied to the parsed TOML tree before deserialization.

use anyhow::{bail, Context, Result};
use hydroscale_core::models::{LinearOuParams, ShellParams, SpectralNsParams};
use hydroscale_core::state::StateVector;
use hydroscale_core::stochastics::TimeGrid;
use hydroscale_core::{rng, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Verify,
    Clt,
    Mdp,
    Rate,
    Controlled,
    Modulus,
    Convergence,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::Verify => "verify",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Mdp => "mdp",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Controlled => "controlled",
            ExperimentKind::Modulus => "modulus",
            ExperimentKind::Convergence => "convergence",
        };
        f.write_str(s)
    }
}

/// Model choice by canonical name with inline parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Shell(ShellParams),
    Ns2d(SpectralNsParams),
    Ou(LinearOuParams),
}

impl ModelConfig {
    pub fn build(&self) -> hydroscale_core::Result<ModelSpec> {
        match self {
            ModelConfig::Shell(p) => hydroscale_core::models::make_shell_model(p),
            ModelConfig::Ns2d(p) => hydroscale_core::models::make_spectral_ns(p),
            ModelConfig::Ou(p) => hydroscale_core::models::make_linear_ou(p),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceConfig {
    /// q_j = j^{-exponent}, j = 1..modes.
    PowerLaw {
        modes: usize,
        exponent: f64,
    },
    Uniform {
        modes: usize,
        value: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl CovarianceConfig {
    pub fn build(&self) -> hydroscale_core::Result<hydroscale_core::CovarianceSpec> {
        match self {
            CovarianceConfig::PowerLaw { modes, exponent } => Ok(
                hydroscale_core::CovarianceSpec::power_law(*modes, *exponent),
            ),
            CovarianceConfig::Uniform { modes, value } => {
                hydroscale_core::CovarianceSpec::uniform(*modes, *value)
            }
            CovarianceConfig::Explicit { values } => {
                hydroscale_core::CovarianceSpec::new(values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    pub steps: usize,
}

impl GridConfig {
    pub fn build(&self) -> hydroscale_core::Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.steps)
    }
}

/// Named initial-condition presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// Two adjacent low modes scaled to the requested amplitude.
    SingleMode {
        index: usize,
        amplitude: f64,
    },
    /// Gaussian coefficients with a decaying envelope, normalized to the
    /// amplitude.
    Random {
        seed: u64,
        amplitude: f64,
    },
    /// Smooth data on the two lowest modes, (0.8, 0.6) scaled; stiff modes
    /// start empty and are only filled through the resolved cascade.
    TwoMode {
        amplitude: f64,
    },
}

impl InitialCondition {
    pub fn build(&self, dimension: usize) -> hydroscale_core::Result<StateVector> {
        match self {
            InitialCondition::Zero => Ok(StateVector::zeros(dimension)),
            InitialCondition::SingleMode { index, amplitude } => {
                if *index >= dimension {
                    return Err(hydroscale_core::Error::invalid(format!(
                        "initial mode {index} out of range for dimension {dimension}"
                    )));
                }
                let mut v = vec![0.0; dimension];
                v[*index] = *amplitude;
                StateVector::new(v)
            }
            InitialCondition::TwoMode { amplitude } => {
                if dimension < 2 {
                    return Err(hydroscale_core::Error::invalid(
                        "two_mode preset needs dimension >= 2",
                    ));
                }
                let mut v = vec![0.0; dimension];
                v[0] = 0.8 * amplitude;
                v[1] = 0.6 * amplitude;
                StateVector::new(v)
            }
            InitialCondition::Random { seed, amplitude } => {
                let mut v = vec![0.0; dimension];
                for (i, x) in v.iter_mut().enumerate() {
                    *x = rng::standard_normal(rng::mix64(*seed), i as u64)
                        * 0.5_f64.powf(i as f64 / 2.0);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let c = amplitude / norm;
                    v.iter_mut().for_each(|x| *x *= c);
                }
                StateVector::new(v)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    /// Deviation exponent a in lambda = eps^{-a}.
    pub a_exponent: f64,
    pub eps_list: Vec<f64>,
}

/// Deterministic control used by controlled / modulus runs and as the
/// rate-function seed; constant in time on one noise mode, clipped into
/// the energy ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub mode: usize,
    pub value: f64,
    pub ball: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    /// Unit probe index of Phi(X) = <e, X(T)>.
    pub probe_index: usize,
    pub threshold: f64,
}

/// Pass/fail thresholds; each experiment reads the fields it needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// verify: tolerance of the antisymmetry residual.
    pub antisymmetry_tol: f64,
    /// verify: slack factor on declared constants.
    pub slack: f64,
    /// verify: sampled eta values.
    pub etas: Vec<f64>,
    /// clt: minimum fitted D slope; first-order slope window half-width.
    pub min_clt_slope: f64,
    pub first_order_slope_center: f64,
    pub first_order_slope_halfwidth: f64,
    /// clt on linear models: ceiling for the coupled distance.
    pub linear_coupling_ceiling: f64,
    /// mdp: the decay-slope target and relative tolerance.
    pub decay_target: f64,
    pub decay_rel_tol: f64,
    /// rate: relative tolerance of the extrapolated action vs the target.
    pub rate_rel_tol: f64,
    /// controlled: required final/initial ratio ceiling.
    pub final_over_initial: f64,
    /// modulus: minimum fitted exponent.
    pub min_modulus_exponent: f64,
    /// convergence: minimum fitted strong orders.
    pub min_order_deterministic: f64,
    pub min_order_sde: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            antisymmetry_tol: 1e-10,
            slack: 1.1,
            etas: vec![0.25, 1.0],
            min_clt_slope: 0.4,
            first_order_slope_center: 1.0,
            first_order_slope_halfwidth: 0.2,
            linear_coupling_ceiling: 1e-20,
            decay_target: f64::NAN,
            decay_rel_tol: 0.15,
            rate_rel_tol: 0.01,
            final_over_initial: 0.1,
            min_modulus_exponent: 0.5,
            min_order_deterministic: 0.9,
            min_order_sde: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub base_seed: u64,
    pub replicas: usize,
    /// Worker threads; 0 means one per logical core.
    #[serde(default)]
    pub jobs: usize,
    pub model: ModelConfig,
    pub covariance: CovarianceConfig,
    pub grid: GridConfig,
    pub initial: InitialCondition,
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub verifier_samples: Option<usize>,
    #[serde(default)]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub functional: Option<FunctionalConfig>,
    #[serde(default)]
    pub importance: bool,
    /// convergence: finest dyadic level and the coarse levels.
    #[serde(default)]
    pub finest_level: Option<u32>,
    #[serde(default)]
    pub coarse_levels: Vec<u32>,
    /// modulus: shift exponents and clip level.
    #[serde(default)]
    pub modulus_n_list: Vec<u32>,
    #[serde(default)]
    pub modulus_clip: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn from_toml_value(value: toml::Value) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = value
            .try_into()
            .context("configuration does not match the expected schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
        let mut value: toml::Value = text.parse().context("invalid TOML")?;
        for (path, raw) in overrides {
            apply_override(&mut value, path, raw)?;
        }
        Self::from_toml_value(value)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            bail!("replicas must be positive");
        }
        for eps in &self.scaling.eps_list {
            if !(*eps > 0.0 && *eps <= 1.0) {
                bail!("scaling.eps_list entries must lie in (0, 1], got {eps}");
            }
        }
        if !(self.scaling.a_exponent > 0.0 && self.scaling.a_exponent < 0.5) {
            bail!(
                "scaling.a_exponent must lie in (0, 1/2), got {}",
                self.scaling.a_exponent
            );
        }
        // build everything once so field errors surface before compute
        let model = self.model.build()?;
        let cov = self.covariance.build()?;
        if cov.modes() > model.dimension() {
            bail!(
                "covariance has {} modes but the model dimension is {}",
                cov.modes(),
                model.dimension()
            );
        }
        self.grid.build()?;
        self.initial.build(model.dimension())?;
        if let Some(f) = &self.functional {
            if f.probe_index >= model.dimension() {
                bail!("functional.probe_index out of range");
            }
        }
        if let Some(c) = &self.control {
            if c.mode >= cov.modes() {
                bail!("control.mode out of range for the covariance");
            }
            if c.ball <= 0.0 || c.ball.is_nan() {
                bail!("control.ball must be positive");
            }
        }
        Ok(())
    }
}

/// Sets a dotted path in the TOML tree to a scalar parsed from `raw`
/// (bool, integer, float, then string, in that order).
fn apply_override(value: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let scalar = if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else {
        toml::Value::String(raw.to_string())
    };
    let mut node = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .with_context(|| format!("--set {path}: '{part}' is not a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), scalar);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!("path is never empty")
}
