//! TOML run configuration.
//!
//! ```toml
//! schema_version = 1
//! l = 1
//! epsilons = [0.05, 0.025]   # the second entry is used for the epsilon order
//! observers = [2.0]
//!
//! [grid]
//! dr = 0.015625
//! t_max = 200.0
//! # r_out defaults to the causal minimum plus one
//!
//! [[bumps]]
//! amplitude = 0.2
//! center = 0.0
//! half_width = 1.0
//! smoothness = 8
//!
//! [[terms]]
//! p = 2
//!
//! [fit]
//! tol_gamma = 0.02
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolver::{EvolveError, GridConfig};
use crate::tailfit::FitOptions;
use crate::wavedata::{Bump, DimensionIndex, GeneratingFunction, NonlinearityTerm, SimulationConfig, WaveDataError};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: unsupported schema_version {found} (expected {CONFIG_SCHEMA_VERSION})")]
    SchemaVersion { path: PathBuf, found: u32 },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: WaveDataError },
    #[error("{path}: {source}")]
    Grid { path: PathBuf, source: EvolveError },
}

fn default_cfl() -> f64 {
    0.25
}
fn default_sample_dt() -> f64 {
    0.25
}
fn default_fd_order() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dr: f64,
    pub t_max: f64,
    #[serde(default)]
    pub r_out: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_fd_order")]
    pub fd_order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub l: u32,
    pub epsilons: Vec<f64>,
    pub observers: Vec<f64>,
    pub grid: GridSection,
    pub bumps: Vec<Bump>,
    pub terms: Vec<NonlinearityTerm>,
    #[serde(default)]
    pub fit: FitOptions,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub simulation: SimulationConfig,
    pub fit: FitOptions,
    pub warnings: Vec<String>,
    /// File stem, used to name the output directory.
    pub label: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        Self::parse(&text, path, label)
    }

    pub fn parse(text: &str, path: &Path, label: String) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_file(file, path, label)
    }

    pub fn from_file(file: ConfigFile, path: &Path, label: String) -> Result<Self, ConfigError> {
        let invalid = |source| ConfigError::Invalid {
            path: path.to_owned(),
            source,
        };
        if file.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                path: path.to_owned(),
                found: file.schema_version,
            });
        }
        let dimension = DimensionIndex::new(file.l).map_err(invalid)?;
        let generating = GeneratingFunction::new(file.bumps).map_err(invalid)?;
        let g = &file.grid;
        let mut simulation = SimulationConfig {
            dimension,
            terms: file.terms,
            generating,
            epsilons: file.epsilons,
            grid: GridConfig {
                dr: g.dr,
                r_out: g.r_out.unwrap_or(0.0),
                cfl: g.cfl,
                t_max: g.t_max,
                fd_order: g.fd_order,
                sample_dt: g.sample_dt,
            },
            observers: file.observers,
        };
        if g.r_out.is_none() {
            simulation.grid.r_out = simulation.required_r_out() + 1.0;
        }
        simulation.grid.validate().map_err(|source| ConfigError::Grid {
            path: path.to_owned(),
            source,
        })?;
        let warnings = simulation.validate().map_err(invalid)?;
        Ok(Self {
            simulation,
            fit: file.fit,
            warnings,
            label,
        })
    }

    pub fn eps(&self) -> f64 {
        self.simulation.epsilons[0]
    }

    /// The second amplitude, used for the epsilon order; defaults to half the first.
    pub fn eps_half(&self) -> f64 {
        self.simulation
            .epsilons
            .get(1)
            .copied()
            .unwrap_or(0.5 * self.eps())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
l = 1
epsilons = [0.05]
observers = [2.0]
[grid]
dr = 0.125
t_max = 10.0
[[bumps]]
amplitude = 1.0
center = 0.0
half_width = 1.0
smoothness = 4
[[terms]]
p = 2
"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("test.toml"), "test".into())
    }

    #[test]
    fn base_config_loads_with_defaults() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.simulation.grid.cfl, 0.25);
        assert_eq!(c.simulation.grid.r_out, 14.0);
        assert_eq!(c.eps_half(), 0.025);
        assert_eq!(c.simulation.terms[0], NonlinearityTerm::power(2));
    }

    #[test]
    fn rejects_bad_configs_with_location() {
        let e = parse(&BASE.replace("l = 1", "l = 0")).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { .. }), "{e}");
        let e = parse(&BASE.replace("p = 2", "p = 1")).unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { .. }), "{e}");
        let e = parse(&BASE.replace("dr = 0.125", "dr = 0.125\nbogus = 3")).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let e = parse(&BASE.replace("schema_version = 1", "schema_version = 7")).unwrap_err();
        assert!(matches!(e, ConfigError::SchemaVersion { found: 7, .. }));
        let e = parse(&format!("{BASE}\n[grid2]\n")).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { .. }));
    }
}
