//! Experiment configuration read from a TOML file.
//!
//! Every key is optional; an empty file reproduces the default dipole
//! experiment. See `configs/dipole.toml` at the repository root.

use std::fmt;
use std::path::{Path, PathBuf};

use aefie_mor::analysis::FrequencyGrid;
use aefie_mor::geometry::{discretize_dipole, WireModel};
use aefie_mor::mor::{ResidualNorm, Strategy};
use serde::Deserialize;

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(PathBuf, String),
    Invalid {
        field: &'static str,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(p, e) => write!(f, "cannot parse {}: {e}", p.display()),
            ConfigError::Invalid { field, message } => write!(f, "invalid `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub length_m: f64,
    pub radius_m: f64,
    pub resistivity_ohm_m: f64,
    pub n_segments: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            length_m: 1.0,
            radius_m: 1e-3,
            resistivity_ohm_m: 1.68e-8,
            n_segments: 499,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_points: usize,
    pub spacing: Spacing,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_min_hz: 0.1,
            f_max_hz: 1e9,
            n_points: 300,
            spacing: Spacing::Log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Monolithic,
    Block,
}

impl From<StrategyName> for Strategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Monolithic => Strategy::Monolithic,
            StrategyName::Block => Strategy::Block,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualName {
    Scaled,
    Literal,
}

impl From<ResidualName> for ResidualNorm {
    fn from(r: ResidualName) -> Self {
        match r {
            ResidualName::Scaled => ResidualNorm::PotentialScaled,
            ResidualName::Literal => ResidualNorm::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorConfig {
    pub tolerance: f64,
    pub max_snapshots: usize,
    pub strategies: Vec<StrategyName>,
    pub residual: ResidualName,
}

impl Default for MorConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_snapshots: 100,
            strategies: vec![StrategyName::Monolithic, StrategyName::Block],
            residual: ResidualName::Scaled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub export_matrices: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("output"),
            export_matrices: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub sweep: SweepConfig,
    pub mor: MorConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)
            .map_err(|e| ConfigError::Parse(origin.to_path_buf(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(g.length_m) {
            return Err(invalid(
                "geometry.length_m",
                format!("must be positive, got {}", g.length_m),
            ));
        }
        if !positive(g.radius_m) {
            return Err(invalid(
                "geometry.radius_m",
                format!("must be positive, got {}", g.radius_m),
            ));
        }
        if !positive(g.resistivity_ohm_m) {
            return Err(invalid(
                "geometry.resistivity_ohm_m",
                format!("must be positive, got {}", g.resistivity_ohm_m),
            ));
        }
        if g.n_segments < 3 {
            return Err(invalid(
                "geometry.n_segments",
                format!("must be at least 3, got {}", g.n_segments),
            ));
        }

        let s = &self.sweep;
        if !positive(s.f_min_hz) || !positive(s.f_max_hz) {
            return Err(invalid("sweep", "frequencies must be positive"));
        }
        if s.f_min_hz >= s.f_max_hz {
            return Err(invalid(
                "sweep",
                format!(
                    "f_min_hz ({}) must be below f_max_hz ({})",
                    s.f_min_hz, s.f_max_hz
                ),
            ));
        }
        if s.n_points < 2 {
            return Err(invalid(
                "sweep.n_points",
                format!("must be at least 2, got {}", s.n_points),
            ));
        }

        let m = &self.mor;
        if !(m.tolerance > 0.0 && m.tolerance < 1.0) {
            return Err(invalid(
                "mor.tolerance",
                format!("must lie in (0, 1), got {}", m.tolerance),
            ));
        }
        if m.max_snapshots == 0 {
            return Err(invalid("mor.max_snapshots", "must be at least 1"));
        }
        if m.strategies.is_empty() {
            return Err(invalid(
                "mor.strategies",
                "needs at least one of \"monolithic\", \"block\"",
            ));
        }
        Ok(())
    }

    pub fn model(&self) -> aefie_mor::Result<WireModel> {
        let g = &self.geometry;
        discretize_dipole(g.length_m, g.radius_m, g.resistivity_ohm_m, g.n_segments)
    }

    pub fn grid(&self) -> aefie_mor::Result<FrequencyGrid> {
        let s = &self.sweep;
        match s.spacing {
            Spacing::Log => FrequencyGrid::logarithmic(s.f_min_hz, s.f_max_hz, s.n_points),
            Spacing::Linear => FrequencyGrid::linear(s.f_min_hz, s.f_max_hz, s.n_points),
        }
    }

    /// Configured strategies, deduplicated, monolithic first.
    pub fn strategies(&self) -> Vec<Strategy> {
        let mut out = Vec::new();
        for s in [Strategy::Monolithic, Strategy::Block] {
            if self.mor.strategies.iter().any(|&n| Strategy::from(n) == s) {
                out.push(s);
            }
        }
        out
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
    ExperimentConfig::from_toml(&text, path)
}
