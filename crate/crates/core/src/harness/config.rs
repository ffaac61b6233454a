//! Run configuration and its TOML representation.
//!
//! Every key is optional except `plant`; missing keys take these defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `noise.components` | no noise |
//! | `hypotheses` | empty (required for `ensemble` / `single-ald:<i>`) |
//! | `trajectory.kind` | `filtered_square` |
//! | `trajectory.frequency_hz` | `0.01` |
//! | `trajectory.amplitude` | `1.0` |
//! | `trajectory.sample_period_s` | `1.0` |
//! | `run.steps` | `1000` |
//! | `run.seed` | `0` |
//! | `run.controller` | `ensemble` |
//! | `estimator.w0` | `0.1` in every entry |
//! | `estimator.p0_scale` | `100.0` |
//! | `controller.eps_b` | `1e-6` |
//! | `controller.u_max` | `inf` (no saturation) |
//! | `controller.likelihood_sigma_scaling` | `true` |
//! | `controller.regressor_source` | `output` (`measurement` feeds `z` to the regressors) |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use serde::Deserialize;

use crate::ald_noise::{AldParams, GaussianParams, NoiseComponent, NoiseModel};
use crate::controller::ControlLimits;
use crate::error::{Error, Result};
use crate::plant::{ArxParams, RegressorSource, TrajectoryKind, TrajectorySpec};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_P0_SCALE: f64 = 100.0;
pub const DEFAULT_W0_ENTRY: f64 = 0.1;

pub const PRESET_NAMES: [&str; 5] = ["base", "noise1", "noise2", "noise3", "noise4"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Ensemble,
    /// One quantile filter using hypothesis `i` (zero-based), no ensemble.
    SingleAld(usize),
    Rls,
    Oracle,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerKind::Ensemble => f.write_str("ensemble"),
            ControllerKind::SingleAld(i) => write!(f, "single-ald:{i}"),
            ControllerKind::Rls => f.write_str("rls"),
            ControllerKind::Oracle => f.write_str("oracle"),
        }
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ensemble" => Ok(ControllerKind::Ensemble),
            "rls" => Ok(ControllerKind::Rls),
            "oracle" => Ok(ControllerKind::Oracle),
            other => other
                .strip_prefix("single-ald:")
                .or_else(|| other.strip_prefix("single_ald:"))
                .and_then(|i| i.parse().ok())
                .map(ControllerKind::SingleAld)
                .ok_or_else(|| {
                    Error::invalid(
                        "controller",
                        format!(
                            "unknown controller `{other}` (ensemble, single-ald:<i>, rls, oracle)"
                        ),
                    )
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub plant: ArxParams,
    /// `None` runs the loop without measurement noise.
    pub noise: Option<NoiseModel>,
    pub hypotheses: Vec<AldParams>,
    pub trajectory: TrajectorySpec,
    pub steps: usize,
    pub seed: u64,
    pub controller: ControllerKind,
    pub w0: DVector<f64>,
    pub p0_scale: f64,
    pub limits: ControlLimits,
    pub likelihood_sigma_scaling: bool,
    pub regressor_source: RegressorSource,
}

impl RunConfig {
    /// Defaults around the given plant, noiseless, no hypotheses.
    pub fn new(plant: ArxParams) -> Self {
        let d = plant.dim();
        Self {
            plant,
            noise: None,
            hypotheses: Vec::new(),
            trajectory: TrajectorySpec::standard(TrajectoryKind::FilteredSquare),
            steps: DEFAULT_STEPS,
            seed: 0,
            controller: ControllerKind::Ensemble,
            w0: DVector::from_element(d, DEFAULT_W0_ENTRY),
            p0_scale: DEFAULT_P0_SCALE,
            limits: ControlLimits::default(),
            likelihood_sigma_scaling: true,
            regressor_source: RegressorSource::Output,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::config(
                "run.steps",
                format!("must be at least 2, got {}", self.steps),
            ));
        }
        if self.w0.len() != self.plant.dim() {
            return Err(Error::config(
                "estimator.w0",
                format!(
                    "expected {} entries (m + n), got {}",
                    self.plant.dim(),
                    self.w0.len()
                ),
            ));
        }
        if !(self.p0_scale > 0.0 && self.p0_scale.is_finite()) {
            return Err(Error::config("estimator.p0_scale", "must be positive"));
        }
        match self.controller {
            ControllerKind::Ensemble if self.hypotheses.is_empty() => Err(Error::config(
                "hypotheses",
                "ensemble controller needs at least one hypothesis",
            )),
            ControllerKind::SingleAld(i) if i >= self.hypotheses.len() => Err(Error::config(
                "run.controller",
                format!(
                    "single-ald index {i} out of range for {} hypotheses",
                    self.hypotheses.len()
                ),
            )),
            _ => Ok(()),
        }
    }

    pub fn with_controller(&self, controller: ControllerKind) -> Self {
        Self {
            controller,
            ..self.clone()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: RawPlant,
    noise: Option<RawNoise>,
    #[serde(default)]
    hypotheses: Vec<RawAld>,
    trajectory: Option<RawTrajectory>,
    run: Option<RawRun>,
    estimator: Option<RawEstimator>,
    controller: Option<RawController>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    #[serde(default)]
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    components: Vec<RawComponent>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawKind {
    Ald,
    Gaussian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    weight: f64,
    kind: RawKind,
    tau: Option<f64>,
    mu: Option<f64>,
    sigma: Option<f64>,
    mean: Option<f64>,
    variance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAld {
    tau: f64,
    mu: f64,
    sigma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    kind: Option<TrajectoryKind>,
    frequency_hz: Option<f64>,
    amplitude: Option<f64>,
    sample_period_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    steps: Option<usize>,
    seed: Option<u64>,
    controller: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    w0: Option<Vec<f64>>,
    p0_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    eps_b: Option<f64>,
    u_max: Option<f64>,
    likelihood_sigma_scaling: Option<bool>,
    regressor_source: Option<RegressorSource>,
}

fn at<T>(path: impl Into<String>, r: Result<T>) -> Result<T> {
    let path = path.into();
    r.map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => Error::config(path, reason),
        other => other,
    })
}

fn component(i: usize, c: &RawComponent) -> Result<NoiseComponent> {
    let path = |f: &str| format!("noise.components[{i}].{f}");
    let require =
        |v: Option<f64>, f: &str| v.ok_or_else(|| Error::config(path(f), "missing field"));
    let forbid = |v: Option<f64>, f: &str, kind: &str| match v {
        Some(_) => Err(Error::config(
            path(f),
            format!("not a field of `{kind}` components"),
        )),
        None => Ok(()),
    };
    match c.kind {
        RawKind::Ald => {
            forbid(c.mean, "mean", "ald")?;
            forbid(c.variance, "variance", "ald")?;
            let p = AldParams::new(
                require(c.tau, "tau")?,
                require(c.mu, "mu")?,
                require(c.sigma, "sigma")?,
            );
            Ok(NoiseComponent::Ald(at(
                format!("noise.components[{i}]"),
                p,
            )?))
        }
        RawKind::Gaussian => {
            forbid(c.tau, "tau", "gaussian")?;
            forbid(c.mu, "mu", "gaussian")?;
            forbid(c.sigma, "sigma", "gaussian")?;
            let g = GaussianParams::new(require(c.mean, "mean")?, require(c.variance, "variance")?);
            Ok(NoiseComponent::Gaussian(at(
                format!("noise.components[{i}]"),
                g,
            )?))
        }
    }
}

fn from_raw(raw: RawConfig) -> Result<RunConfig> {
    let plant = at("plant", ArxParams::new(raw.plant.a, raw.plant.b))?;
    let mut cfg = RunConfig::new(plant);

    if let Some(noise) = raw.noise {
        let components = noise
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| Ok((c.weight, component(i, c)?)))
            .collect::<Result<Vec<_>>>()?;
        cfg.noise = Some(at("noise.components", NoiseModel::new(components))?);
    }

    cfg.hypotheses = raw
        .hypotheses
        .iter()
        .enumerate()
        .map(|(i, h)| {
            at(
                format!("hypotheses[{i}]"),
                AldParams::new(h.tau, h.mu, h.sigma),
            )
        })
        .collect::<Result<_>>()?;

    if let Some(t) = raw.trajectory {
        let d = cfg.trajectory;
        cfg.trajectory = at(
            "trajectory",
            TrajectorySpec::new(
                t.kind.unwrap_or(d.kind),
                t.frequency_hz.unwrap_or(d.frequency),
                t.amplitude.unwrap_or(d.amplitude),
                t.sample_period_s.unwrap_or(d.sample_period),
            ),
        )?;
    }

    if let Some(r) = raw.run {
        cfg.steps = r.steps.unwrap_or(cfg.steps);
        cfg.seed = r.seed.unwrap_or(cfg.seed);
        if let Some(c) = r.controller {
            cfg.controller = at("run.controller", c.parse())?;
        }
    }

    if let Some(e) = raw.estimator {
        if let Some(w0) = e.w0 {
            cfg.w0 = DVector::from_vec(w0);
        }
        cfg.p0_scale = e.p0_scale.unwrap_or(cfg.p0_scale);
    }

    if let Some(c) = raw.controller {
        cfg.limits = at(
            "controller",
            ControlLimits::new(
                c.eps_b.unwrap_or(cfg.limits.eps_b),
                c.u_max.unwrap_or(cfg.limits.u_max),
            ),
        )?;
        cfg.likelihood_sigma_scaling = c
            .likelihood_sigma_scaling
            .unwrap_or(cfg.likelihood_sigma_scaling);
        cfg.regressor_source = c.regressor_source.unwrap_or(cfg.regressor_source);
    }

    cfg.validate()?;
    Ok(cfg)
}

/// Parses a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de =
        toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message().to_string())
    })?;
    from_raw(raw)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// TOML text of a shipped preset.
pub fn preset_source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "base" => include_str!("../../presets/base.toml"),
        "noise1" => include_str!("../../presets/noise1.toml"),
        "noise2" => include_str!("../../presets/noise2.toml"),
        "noise3" => include_str!("../../presets/noise3.toml"),
        "noise4" => include_str!("../../presets/noise4.toml"),
        other => {
            return Err(Error::invalid(
                "preset",
                format!("unknown preset `{other}` (base, noise1..noise4)"),
            ))
        }
    })
}

pub fn load_preset(name: &str) -> Result<RunConfig> {
    parse_config(preset_source(name)?)
}
