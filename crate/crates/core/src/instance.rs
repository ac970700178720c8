//! A problem instance independent of `(n, m)`: arcs, data, bounds and
//! solver settings. Sweeps and the command line build concrete problems
//! from it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arcgeom::{build_constraint_grid, ArcSystem, GeometryError};
use crate::certifier::{certify, Certificate, CertifyOptions};
use crate::dualsolver::{maximize_dual, Problem, SolveOptions, SolveResult, SolverError};
use crate::moments::{assemble, GramMode, MomentError, SampledBoundaryData};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Moments(#[from] MomentError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{given} bounds given for {components} constraint arcs; give one, or one per arc")]
    BoundCount { given: usize, components: usize },
    #[error("bound {0} is not positive and finite")]
    BadBound(f64),
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub arcs: ArcSystem,
    pub data: SampledBoundaryData,
    /// One bound for all of `J`, or one per component of `J`.
    pub bounds: Vec<f64>,
    pub gram_mode: GramMode,
    pub solve: SolveOptions,
    pub certify: CertifyOptions,
}

/// A solved and certified instance at one `(n, m)`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub problem: Problem,
    pub result: SolveResult,
    pub certificate: Certificate,
}

impl Instance {
    /// Bounds per component of `J`, validated.
    pub fn component_bounds(&self) -> Result<Vec<f64>, InstanceError> {
        let components = self.arcs.complement().len();
        if let Some(&bad) = self.bounds.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(InstanceError::BadBound(bad));
        }
        match self.bounds.len() {
            1 => Ok(vec![self.bounds[0]; components]),
            k if k == components => Ok(self.bounds.clone()),
            given => Err(InstanceError::BoundCount { given, components }),
        }
    }

    pub fn problem(&self, n: usize, m: usize) -> Result<Problem, InstanceError> {
        let per_component = self.component_bounds()?;
        let grid = build_constraint_grid(&self.arcs, m)?;
        let quad = assemble(&self.data, &self.arcs, n, self.gram_mode)?;
        let bounds = grid.expand_bounds(&per_component);
        Ok(Problem::new(quad.gram, quad.moments, grid, bounds)?)
    }

    pub fn run(&self, n: usize, m: usize) -> Result<Outcome, InstanceError> {
        let problem = self.problem(n, m)?;
        let result = maximize_dual(&problem, &self.solve)?;
        let certificate = certify(&problem, &result.coefficients, &result.multipliers, &self.certify);
        Ok(Outcome { problem, result, certificate })
    }

    pub fn digest(&self) -> String {
        data_digest(&self.data)
    }
}

/// SHA-256 over the little-endian bytes of every sample.
pub fn data_digest(data: &SampledBoundaryData) -> String {
    let mut h = Sha256::new();
    for s in &data.samples {
        h.update(s.theta.to_le_bytes());
        h.update(s.value.re.to_le_bytes());
        h.update(s.value.im.to_le_bytes());
        h.update(s.weight.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Grid quantities summarizing a solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub max_modulus: f64,
    /// Fraction of grid points with `|g(x_k)| >= 0.9 ρ_k`.
    pub saturation_fraction: f64,
}

pub fn grid_summary(problem: &Problem, c: &[Complex64]) -> GridSummary {
    let values = problem.grid_values(c);
    let max_modulus = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let saturated = values.iter().zip(problem.bounds()).filter(|(g, r)| g.norm() >= 0.9 * **r).count();
    let saturation_fraction = if values.is_empty() { 0.0 } else { saturated as f64 / values.len() as f64 };
    GridSummary { max_modulus, saturation_fraction }
}
