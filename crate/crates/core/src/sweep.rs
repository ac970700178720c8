//! Convergence sweeps over the grid size `m` at fixed degree, and over the
//! degree `n` with `m` tied to `n` by a rule.
//!
//! Cells are solved independently, in parallel when asked, and merged in
//! input order so reports are reproducible.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certifier::Verdict;
use crate::dualsolver::SolveStatus;
use crate::instance::{grid_summary, Instance};

pub const REPORT_SCHEMA: &str = "arcfit/report-v1";

/// Relative coefficient distance below which an `m` sweep counts as converged.
pub const CAUCHY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep values must be strictly increasing")]
    NotIncreasing,
    #[error("sweep has no cells")]
    Empty,
    #[error("grid rule produced m = 0 for n = {0}")]
    ZeroGrid(usize),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// How the grid size follows the degree in an `n` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRule {
    Fixed(usize),
    /// `m = factor · n`, at least 1.
    Factor(usize),
}

impl Default for GridRule {
    fn default() -> Self {
        GridRule::Factor(2)
    }
}

impl GridRule {
    pub fn grid_for(&self, n: usize) -> usize {
        match *self {
            GridRule::Fixed(m) => m,
            GridRule::Factor(k) => (k * n).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Grid,
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub m: usize,
    pub status: Option<SolveStatus>,
    pub verdict: Option<Verdict>,
    /// Set when the cell could not be solved.
    pub error: Option<String>,
    pub misfit: Option<f64>,
    pub max_modulus: Option<f64>,
    pub saturation_fraction: Option<f64>,
    pub coefficient_norm: Option<f64>,
    /// `||c(n, m) − c(n, m_next)||₂` in a grid sweep.
    pub delta: Option<f64>,
    /// `delta < 1e-6 · ||c||`.
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    /// Approximation arcs `I` as `[start, end]` in radians.
    pub arcs: Vec<(f64, f64)>,
    pub bounds: Vec<f64>,
    pub data_digest: String,
    pub samples: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_rule: Option<GridRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub kind: SweepKind,
    pub metadata: SweepMetadata,
    pub cells: Vec<SweepCell>,
    /// Wall-clock seconds per cell, in cell order. Not reproducible.
    pub timing: Vec<f64>,
}

struct Solved {
    cell: SweepCell,
    coefficients: Option<Vec<num_complex::Complex64>>,
    seconds: f64,
}

fn solve_cell(instance: &Instance, n: usize, m: usize) -> Solved {
    let start = Instant::now();
    let mut cell = SweepCell {
        n,
        m,
        status: None,
        verdict: None,
        error: None,
        misfit: None,
        max_modulus: None,
        saturation_fraction: None,
        coefficient_norm: None,
        delta: None,
        converged: None,
        iterations: None,
    };
    let coefficients = match instance.run(n, m) {
        Ok(out) => {
            let summary = grid_summary(&out.problem, &out.result.coefficients);
            cell.status = Some(out.result.status);
            cell.verdict = Some(out.certificate.verdict);
            cell.misfit = Some(out.result.misfit);
            cell.max_modulus = Some(summary.max_modulus);
            cell.saturation_fraction = Some(summary.saturation_fraction);
            cell.coefficient_norm = Some(norm(&out.result.coefficients));
            cell.iterations = Some(out.result.iterations);
            Some(out.result.coefficients)
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            None
        }
    };
    Solved { cell, coefficients, seconds: start.elapsed().as_secs_f64() }
}

fn norm(c: &[num_complex::Complex64]) -> f64 {
    c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn strictly_increasing(values: &[usize]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

fn run_cells(instance: &Instance, cells: &[(usize, usize)], jobs: usize) -> Result<Vec<Solved>, SweepError> {
    if jobs <= 1 {
        return Ok(cells.iter().map(|&(n, m)| solve_cell(instance, n, m)).collect());
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|&(n, m)| solve_cell(instance, n, m)).collect()))
}

fn metadata(instance: &Instance, grid_rule: Option<GridRule>) -> SweepMetadata {
    SweepMetadata {
        arcs: instance.arcs.clone().into(),
        bounds: instance.bounds.clone(),
        data_digest: instance.digest(),
        samples: instance.data.len(),
        tol: instance.solve.tol,
        grid_rule,
    }
}

/// Solve at fixed `n` for each `m` and record the distance to the next
/// finer solution.
pub fn sweep_m(instance: &Instance, n: usize, ms: &[usize], jobs: usize) -> Result<SweepReport, SweepError> {
    if ms.is_empty() {
        return Err(SweepError::Empty);
    }
    if !strictly_increasing(ms) {
        return Err(SweepError::NotIncreasing);
    }
    if ms[0] == 0 {
        return Err(SweepError::ZeroGrid(n));
    }
    let cells: Vec<(usize, usize)> = ms.iter().map(|&m| (n, m)).collect();
    let mut solved = run_cells(instance, &cells, jobs)?;
    for i in 0..solved.len().saturating_sub(1) {
        let pair = match (&solved[i].coefficients, &solved[i + 1].coefficients) {
            (Some(a), Some(b)) => {
                let delta = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                Some((delta, delta < CAUCHY_TOL * norm(a)))
            }
            _ => None,
        };
        if let Some((delta, converged)) = pair {
            solved[i].cell.delta = Some(delta);
            solved[i].cell.converged = Some(converged);
        }
    }
    Ok(SweepReport {
        schema: REPORT_SCHEMA.to_string(),
        kind: SweepKind::Grid,
        metadata: metadata(instance, None),
        timing: solved.iter().map(|s| s.seconds).collect(),
        cells: solved.into_iter().map(|s| s.cell).collect(),
    })
}

/// Solve for each `n` with `m` from `rule`.
pub fn sweep_n(instance: &Instance, ns: &[usize], rule: GridRule, jobs: usize) -> Result<SweepReport, SweepError> {
    if ns.is_empty() {
        return Err(SweepError::Empty);
    }
    if !strictly_increasing(ns) {
        return Err(SweepError::NotIncreasing);
    }
    let mut cells = Vec::with_capacity(ns.len());
    for &n in ns {
        let m = rule.grid_for(n);
        if m == 0 {
            return Err(SweepError::ZeroGrid(n));
        }
        cells.push((n, m));
    }
    let solved = run_cells(instance, &cells, jobs)?;
    Ok(SweepReport {
        schema: REPORT_SCHEMA.to_string(),
        kind: SweepKind::Degree,
        metadata: metadata(instance, Some(rule)),
        timing: solved.iter().map(|s| s.seconds).collect(),
        cells: solved.into_iter().map(|s| s.cell).collect(),
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn snake<T: Serialize>(v: &Option<T>) -> String {
    v.as_ref()
        .and_then(|x| serde_json::to_value(x).ok())
        .and_then(|x| x.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl SweepReport {
    /// One CSV row per cell; runtime is the last column.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "n",
            "m",
            "status",
            "verdict",
            "misfit",
            "max_modulus",
            "saturation_fraction",
            "coefficient_norm",
            "delta",
            "converged",
            "iterations",
            "error",
            "runtime_s",
        ])?;
        for (cell, t) in self.cells.iter().zip(&self.timing) {
            w.write_record([
                cell.n.to_string(),
                cell.m.to_string(),
                snake(&cell.status),
                snake(&cell.verdict),
                opt(&cell.misfit),
                opt(&cell.max_modulus),
                opt(&cell.saturation_fraction),
                opt(&cell.coefficient_norm),
                opt(&cell.delta),
                opt(&cell.converged),
                opt(&cell.iterations),
                cell.error.clone().unwrap_or_default(),
                t.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
