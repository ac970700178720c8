//! Run configuration read from TOML. Angles are given in units of π.
//!
//! ```toml
//! [problem]
//! arcs = [[0.7, 1.3]]     # I
//! degree = 400
//! grid = 800              # defaults to 2 * degree
//! bound = 0.96            # or one value per arc of J
//!
//! [data]
//! source = "synthetic"
//! case = { kind = "filterlike" }
//! density = 1601
//! ```
//!
//! Data file paths are relative to the configuration file; output paths are
//! relative to the working directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arcgeom::{ArcSystem, FrequencyMap, GeometryError};
use crate::certifier::CertifyOptions;
use crate::dualsolver::SolveOptions;
use crate::ingest::{generate_synthetic, load_measurements, parse_measurements, IngestError, SyntheticCase};
use crate::instance::Instance;
use crate::moments::GramMode;
use crate::sweep::GridRule;

pub const DEFAULT_DENSITY: usize = 2001;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Uniform(f64),
    PerArc(Vec<f64>),
}

impl Bound {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Bound::Uniform(r) => vec![*r],
            Bound::PerArc(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Approximation arcs `I`, in units of π.
    pub arcs: Vec<(f64, f64)>,
    pub degree: Option<usize>,
    pub grid: Option<usize>,
    pub bound: Option<Bound>,
    #[serde(default)]
    pub gram: GramMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}

fn default_max_iter() -> usize {
    SolveOptions::default().max_iter
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_stationarity_tol")]
    pub stationarity_tol: f64,
    pub refine: Option<usize>,
}

fn default_stationarity_tol() -> f64 {
    CertifyOptions::default().stationarity_tol
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { stationarity_tol: default_stationarity_tol(), refine: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic {
        case: SyntheticCase,
        /// Samples per arc of `I`.
        density: Option<usize>,
    },
    File {
        path: PathBuf,
        /// Frequency band in Hz; defaults to the first and last rows.
        band: Option<(f64, f64)>,
        /// Target angles in units of π; defaults to the first arc of `I`.
        angles: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub result: Option<PathBuf>,
    /// Sweep report path without extension; `.json` and `.csv` are added.
    pub report: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOver {
    Grid,
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub over: SweepOver,
    #[serde(default)]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub rule: GridRule,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
    /// Directory that relative data paths refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub degree: Option<usize>,
    pub grid: Option<usize>,
    pub bound: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub jobs: Option<usize>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.degree {
            self.problem.degree = Some(n);
        }
        if let Some(m) = o.grid {
            self.problem.grid = Some(m);
        }
        if let Some(b) = &o.bound {
            self.problem.bound = Some(if b.len() == 1 { Bound::Uniform(b[0]) } else { Bound::PerArc(b.clone()) });
        }
        if let Some(t) = o.tol {
            self.solver.tol = t;
        }
        if let (Some(j), Some(s)) = (o.jobs, self.sweep.as_mut()) {
            s.jobs = j;
        }
    }

    pub fn arcs(&self) -> Result<ArcSystem, ConfigError> {
        Ok(ArcSystem::from_pi_units(&self.problem.arcs)?)
    }

    pub fn degree(&self) -> Result<usize, ConfigError> {
        self.problem.degree.ok_or_else(|| ConfigError::Invalid("problem.degree is required".into()))
    }

    /// `problem.grid`, or twice the degree.
    pub fn grid(&self) -> Result<usize, ConfigError> {
        let m = match self.problem.grid {
            Some(m) => m,
            None => (2 * self.degree()?).max(1),
        };
        if m == 0 {
            return Err(ConfigError::Invalid("problem.grid must be at least 1".into()));
        }
        Ok(m)
    }

    fn bounds(&self) -> Result<Vec<f64>, ConfigError> {
        let b = self.problem.bound.as_ref().ok_or_else(|| ConfigError::Invalid("problem.bound is required".into()))?;
        let values = b.values();
        if values.is_empty() || values.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(ConfigError::Invalid("bounds must be positive and finite".into()));
        }
        Ok(values)
    }

    fn validate_numbers(&self) -> Result<(), ConfigError> {
        if !(self.solver.tol > 0.0) || !self.solver.tol.is_finite() {
            return Err(ConfigError::Invalid("solver.tol must be positive".into()));
        }
        if !(self.certify.stationarity_tol > 0.0) {
            return Err(ConfigError::Invalid("certify.stationarity_tol must be positive".into()));
        }
        Ok(())
    }

    /// Arcs, data, bounds and options; `degree` is only needed to size the
    /// default sample density.
    pub fn instance(&self) -> Result<Instance, ConfigError> {
        self.validate_numbers()?;
        let arcs = self.arcs()?;
        let data = match &self.data {
            DataConfig::Synthetic { case, density } => {
                let density = density.unwrap_or(DEFAULT_DENSITY);
                if density < 2 {
                    return Err(ConfigError::Invalid("data.density must be at least 2".into()));
                }
                generate_synthetic(case, &arcs, density)
            }
            DataConfig::File { path, band, angles } => {
                let path = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
                let (f_lo, f_hi) = match band {
                    Some(b) => *b,
                    None => file_band(&path)?,
                };
                let (t_lo, t_hi) = match angles {
                    Some((a, b)) => (a * std::f64::consts::PI, b * std::f64::consts::PI),
                    None => {
                        let first = arcs.arcs()[0];
                        (first.start, first.start + first.length)
                    }
                };
                let map = FrequencyMap::new(f_lo, f_hi, t_lo, t_hi)?;
                load_measurements(&path, &map)?
            }
        };
        Ok(Instance {
            arcs,
            data,
            bounds: self.bounds()?,
            gram_mode: self.problem.gram,
            solve: SolveOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, initial: None },
            certify: CertifyOptions {
                kkt_tol: self.solver.tol,
                stationarity_tol: self.certify.stationarity_tol,
                refine: self.certify.refine,
            },
        })
    }
}

fn file_band(path: &Path) -> Result<(f64, f64), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let file = parse_measurements(&text)?;
    match (file.rows.first(), file.rows.last()) {
        (Some(a), Some(b)) if b.freq_hz > a.freq_hz => Ok((a.freq_hz, b.freq_hz)),
        _ => Err(ConfigError::Invalid(format!("{} needs at least two frequencies to define a band", path.display()))),
    }
}
