//! Strict JSON run configuration with documented defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::sde::{Forcing, NoiseChannel, NormKind, Scheme, StoppingRule};
use crate::spaces::PhysicalParams;
use crate::verify::VerifyOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub n_radial: usize,
    pub n_angular_modes: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            n_radial: 24,
            n_angular_modes: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub nu: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            nu: 0.5,
            alpha: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub n_modes: usize,
    /// Directory of the binary basis cache; no caching when absent.
    pub cache_dir: Option<PathBuf>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            n_modes: 16,
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub channels: Vec<NoiseChannel>,
}

/// Initial coefficients `c(0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `cᵢ = amplitude · λᵢ^(−decay)`
    Spectrum { amplitude: f64, decay: f64 },
    /// Explicit leading coefficients, zero beyond.
    Modes { coefficients: Vec<f64> },
    Zero,
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Spectrum {
            amplitude: 1.0,
            decay: 1.0,
        }
    }
}

impl InitialCondition {
    pub fn coefficients(&self, eigenvalues: &[f64]) -> Vec<f64> {
        match self {
            InitialCondition::Spectrum { amplitude, decay } => {
                eigenvalues.iter().map(|l| amplitude * l.powf(-decay)).collect()
            }
            InitialCondition::Modes { coefficients } => {
                let mut c = vec![0.0; eigenvalues.len()];
                for (a, b) in c.iter_mut().zip(coefficients) {
                    *a = *b;
                }
                c
            }
            InitialCondition::Zero => vec![0.0; eigenvalues.len()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_final: f64,
    /// Defaults to `t_final / 4096`.
    pub dt: Option<f64>,
    pub save_stride: usize,
    pub scheme: Scheme,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t_final: 1.0,
            dt: None,
            save_stride: 1,
            scheme: Scheme::Explicit,
        }
    }
}

impl TimeConfig {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.t_final / 4096.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingConfig {
    /// Threshold on `‖Y‖_H3`.
    pub n_h3: Option<f64>,
    /// Threshold on `‖Y‖_V`.
    pub n_v: Option<f64>,
}

impl StoppingConfig {
    pub fn rules(&self) -> Result<Vec<StoppingRule>> {
        let mut out = Vec::new();
        if let Some(n) = self.n_h3 {
            out.push(StoppingRule::new(n, NormKind::H3).map_err(|_| Error::config("stopping.n_h3", "must be > 0"))?);
        }
        if let Some(n) = self.n_v {
            out.push(StoppingRule::new(n, NormKind::V).map_err(|_| Error::config("stopping.n_v", "must be > 0"))?);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub paths: usize,
    pub base_seed: u64,
    /// Exponent of the `Lᵖ` moment estimate.
    pub p: f64,
    pub execution: Execution,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            paths: 100,
            base_seed: 0,
            p: 4.0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub eps: Vec<f64>,
    /// Constant of `ξ(t) = exp(−C₃∫(‖Y₁‖_H3 + ‖Y₂‖_H3))`.
    pub c3: f64,
    /// Constants of the energy-method weight `exp(−C₂t − 2C₁∫‖Y₁‖_W̃)`.
    pub c1: f64,
    pub c2: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            eps: vec![1e-2, 5e-3, 2.5e-3],
            c3: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    pub n_list: Vec<usize>,
    pub paths: usize,
    pub nonlinear: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            n_list: vec![8, 16, 32],
            paths: 1,
            nonlinear: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub samples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { samples: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub per_path_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("grade2-out"),
            per_path_csv: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub basis: BasisConfig,
    pub noise: NoiseConfig,
    pub forcing: Forcing,
    pub initial: InitialCondition,
    pub time: TimeConfig,
    pub stopping: StoppingConfig,
    pub ensemble: EnsembleConfig,
    pub stability: StabilityConfig,
    pub converge: ConvergeConfig,
    pub verify: VerifyOptions,
    pub probes: ProbeConfig,
    pub output: OutputConfig,
}

/// Parse, resolve defaults and validate.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    cfg.time.dt = Some(cfg.time.dt());
    cfg.validate()?;
    Ok(cfg)
}

fn positive_finite(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<PhysicalParams> {
        let p = PhysicalParams {
            nu: self.physics.nu,
            alpha: self.physics.alpha,
            gamma: self.physics.gamma,
        };
        p.validate("physics")?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.n_radial < 4 {
            return Err(Error::config("geometry.n_radial", "must be >= 4"));
        }
        if self.geometry.n_angular_modes < 1 {
            return Err(Error::config("geometry.n_angular_modes", "must be >= 1"));
        }
        self.params()?;
        let n = self.basis.n_modes;
        if n == 0 {
            return Err(Error::config("basis.n_modes", "must be >= 1"));
        }
        for (k, ch) in self.noise.channels.iter().enumerate() {
            if ch.shape_mode_index >= n {
                return Err(Error::config(
                    format!("noise.channels[{k}].shape_mode_index"),
                    format!("must be < n_modes = {n}, got {}", ch.shape_mode_index),
                ));
            }
            if !(ch.sigma >= 0.0 && ch.sigma.is_finite()) {
                return Err(Error::config(format!("noise.channels[{k}].sigma"), "must be finite and >= 0"));
            }
            if !ch.rho.is_finite() {
                return Err(Error::config(format!("noise.channels[{k}].rho"), "must be finite"));
            }
        }
        match &self.forcing {
            Forcing::Modes { coefficients } => {
                if coefficients.len() > n {
                    return Err(Error::config(
                        "forcing.coefficients",
                        format!("has {} entries but n_modes = {n}", coefficients.len()),
                    ));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("forcing.coefficients", "entries must be finite"));
                }
            }
            Forcing::Rotation { amplitude } if !amplitude.is_finite() => {
                return Err(Error::config("forcing.amplitude", "must be finite"));
            }
            _ => {}
        }
        match &self.initial {
            InitialCondition::Spectrum { amplitude, decay } => {
                if !amplitude.is_finite() || !decay.is_finite() {
                    return Err(Error::config("initial", "amplitude and decay must be finite"));
                }
            }
            InitialCondition::Modes { coefficients } => {
                if coefficients.len() > n {
                    return Err(Error::config(
                        "initial.coefficients",
                        format!("has {} entries but n_modes = {n}", coefficients.len()),
                    ));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("initial.coefficients", "entries must be finite"));
                }
            }
            InitialCondition::Zero => {}
        }
        positive_finite("time.t_final", self.time.t_final)?;
        let dt = self.time.dt();
        if !(dt > 0.0 && dt < self.time.t_final) {
            return Err(Error::config("time.dt", format!("must lie in (0, {}), got {dt}", self.time.t_final)));
        }
        if self.time.save_stride == 0 {
            return Err(Error::config("time.save_stride", "must be >= 1"));
        }
        self.stopping.rules()?;
        if self.ensemble.paths == 0 {
            return Err(Error::config("ensemble.paths", "must be >= 1"));
        }
        if !(self.ensemble.p >= 1.0 && self.ensemble.p.is_finite()) {
            return Err(Error::config("ensemble.p", "must be finite and >= 1"));
        }
        if self.stability.eps.is_empty() {
            return Err(Error::config("stability.eps", "must not be empty"));
        }
        for (k, e) in self.stability.eps.iter().enumerate() {
            if !(*e >= 0.0 && e.is_finite()) {
                return Err(Error::config(format!("stability.eps[{k}]"), "must be finite and >= 0"));
            }
        }
        for (name, v) in [("c3", self.stability.c3), ("c1", self.stability.c1), ("c2", self.stability.c2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("stability.{name}"), "must be finite and >= 0"));
            }
        }
        let nl = &self.converge.n_list;
        if nl.is_empty() || nl[0] == 0 || nl.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("converge.n_list", "must be non-empty, positive and strictly ascending"));
        }
        if self.converge.paths == 0 {
            return Err(Error::config("converge.paths", "must be >= 1"));
        }
        if !self.verify.field_amplitude.is_finite() {
            return Err(Error::config("verify.field_amplitude", "must be finite"));
        }
        if !self.verify.tamper_gamma.is_finite() {
            return Err(Error::config("verify.tamper_gamma", "must be finite"));
        }
        Ok(())
    }
}
