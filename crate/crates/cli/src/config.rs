//! Experiment configuration: TOML in, validated [`ExperimentConfig`] out.

use std::path::Path;

use holodof::em_kernel::FREE_SPACE_IMPEDANCE;
use holodof::{Method, PlanarSurface, QuadratureRule, Threshold, ThresholdMode, Vec3, WaveConfig};
use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), message: message.into() }
    }

    /// Dotted path of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn default_impedance() -> f64 {
    FREE_SPACE_IMPEDANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    pub wavelength_m: f64,
    #[serde(default = "default_impedance")]
    pub impedance_ohm: f64,
}

/// Either an axis-angle pair or a full 3×3 matrix (rows); identity if empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 3]; 3]>,
}

impl RotationSpec {
    fn resolve(&self, field: &str) -> Result<Matrix3<f64>, ConfigError> {
        match (&self.matrix, &self.axis, self.angle_rad) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(ConfigError::invalid(
                field,
                "give either matrix or axis/angle_rad, not both",
            )),
            (Some(m), None, None) => Ok(Matrix3::from_fn(|i, j| m[i][j])),
            (None, None, None) => Ok(Matrix3::identity()),
            (None, Some(a), angle) => {
                let axis = Vec3::new(a[0], a[1], a[2]);
                if !(axis.norm() > 0.0) || !axis.iter().all(|x| x.is_finite()) {
                    return Err(ConfigError::invalid(format!("{field}.axis"), "must be a finite nonzero vector"));
                }
                Ok(Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle.unwrap_or(0.0)).into_inner())
            }
            (None, None, Some(angle)) => {
                if angle == 0.0 {
                    Ok(Matrix3::identity())
                } else {
                    Err(ConfigError::invalid(format!("{field}.axis"), "required when angle_rad is nonzero"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub center_m: [f64; 3],
    #[serde(default)]
    pub rotation: RotationSpec,
    pub size_m: [f64; 2],
    pub grid: [usize; 2],
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl SurfaceSection {
    pub fn surface(&self, field: &str) -> Result<PlanarSurface, ConfigError> {
        let rotation = self.rotation.resolve(&format!("{field}.rotation"))?;
        let c = self.center_m;
        PlanarSurface::new(Vec3::new(c[0], c[1], c[2]), &rotation, self.size_m[0], self.size_m[1])
            .map_err(|e| ConfigError::invalid(field, e.to_string()))
    }

    pub fn unknowns(&self) -> usize {
        self.grid[0] * self.grid[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub mode: ThresholdMode,
    pub value: f64,
}

impl Default for GammaSection {
    fn default() -> Self {
        Self { mode: ThresholdMode::Relative, value: 0.5 }
    }
}

impl GammaSection {
    pub fn threshold(&self) -> Threshold {
        Threshold { mode: self.mode, value: self.value }
    }

    /// Parses `MODE:VALUE`, e.g. `relative:0.5`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::invalid("gamma", format!("expected MODE:VALUE, got {text:?}"));
        let (mode, value) = text.split_once(':').ok_or_else(bad)?;
        let mode = match mode.trim() {
            "relative" => ThresholdMode::Relative,
            "absolute" => ThresholdMode::Absolute,
            _ => return Err(bad()),
        };
        let value = value.trim().parse().map_err(|_| bad())?;
        Ok(Self { mode, value })
    }
}

fn default_scales() -> Vec<f64> {
    vec![1.0, 2.0, 3.0]
}

fn default_padding() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_extent_m: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_grid: Option<[usize; 2]>,
    #[serde(default = "default_padding")]
    pub padding: usize,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
}

impl Default for LandauSection {
    fn default() -> Self {
        Self { lag_extent_m: None, lag_grid: None, padding: default_padding(), scales: default_scales() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_directory() -> String {
    "holodof-out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

fn default_max_unknowns() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    /// Largest grid (points per surface) the dense solvers may be given.
    #[serde(default = "default_max_unknowns")]
    pub max_unknowns: usize,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self { max_unknowns: default_max_unknowns() }
    }
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub methods: Vec<Method>,
    pub wave: WaveSection,
    pub tx: SurfaceSection,
    pub rx: SurfaceSection,
    #[serde(default)]
    pub gamma: GammaSection,
    #[serde(default)]
    pub landau_options: LandauSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub limits: LimitsSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn wave_config(&self) -> Result<WaveConfig, ConfigError> {
        WaveConfig::with_impedance(self.wave.wavelength_m, self.wave.impedance_ohm)
            .map_err(|e| ConfigError::invalid("wave", e.to_string()))
    }

    pub fn surfaces(&self) -> Result<(PlanarSurface, PlanarSurface), ConfigError> {
        Ok((self.tx.surface("tx")?, self.rx.surface("rx")?))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let w = &self.wave;
        if !(w.wavelength_m > 0.0 && w.wavelength_m.is_finite()) {
            return Err(ConfigError::invalid("wave.wavelength_m", format!("must be positive, got {}", w.wavelength_m)));
        }
        if !(w.impedance_ohm > 0.0 && w.impedance_ohm.is_finite()) {
            return Err(ConfigError::invalid("wave.impedance_ohm", format!("must be positive, got {}", w.impedance_ohm)));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::invalid("methods", "select at least one of svd, cutset, landau"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if matches!(m, Method::LandauGamma) {
                return Err(ConfigError::invalid(format!("methods[{i}]"), "expected one of svd, cutset, landau"));
            }
            if self.methods[..i].contains(m) {
                return Err(ConfigError::invalid(format!("methods[{i}]"), format!("{} listed twice", m.as_str())));
            }
        }
        for (name, s) in [("tx", &self.tx), ("rx", &self.rx)] {
            if s.grid.contains(&0) {
                return Err(ConfigError::invalid(format!("{name}.grid"), "counts must be >= 1"));
            }
            if s.size_m.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(ConfigError::invalid(format!("{name}.size_m"), "side lengths must be positive"));
            }
            if s.center_m.iter().any(|c| !c.is_finite()) {
                return Err(ConfigError::invalid(format!("{name}.center_m"), "must be finite"));
            }
        }
        let (tx, rx) = self.surfaces()?;
        if tx.intersects(&rx) {
            return Err(ConfigError::invalid("rx", "transmit and receive surfaces intersect"));
        }
        self.gamma
            .threshold()
            .validate()
            .map_err(|e| ConfigError::invalid("gamma.value", e.to_string()))?;
        let l = &self.landau_options;
        if let Some(e) = l.lag_extent_m {
            if e.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(ConfigError::invalid("landau_options.lag_extent_m", "must be positive"));
            }
        }
        if let Some(g) = l.lag_grid {
            if g.iter().any(|n| *n < 3) {
                return Err(ConfigError::invalid("landau_options.lag_grid", "needs at least 3 lags per axis"));
            }
        }
        if l.padding == 0 {
            return Err(ConfigError::invalid("landau_options.padding", "must be >= 1"));
        }
        if let Some(i) = l.scales.iter().position(|r| !(*r >= 1.0 && r.is_finite())) {
            return Err(ConfigError::invalid(format!("landau_options.scales[{i}]"), "scales must be >= 1"));
        }
        if self.output.formats.is_empty() {
            return Err(ConfigError::invalid("output.formats", "select csv and/or json"));
        }
        if self.limits.max_unknowns == 0 {
            return Err(ConfigError::invalid("limits.max_unknowns", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    ExperimentConfig::from_toml(&text)
}
