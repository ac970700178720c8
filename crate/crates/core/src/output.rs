//! Versioned JSON documents: solve results, sweep reports and plot data.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::arcgeom::ArcSystem;
use crate::certifier::{evaluate, Certificate};
use crate::dualsolver::SolveResult;
use crate::instance::{Instance, InstanceError, Outcome};
use crate::moments::{GramMode, SampledBoundaryData};
use crate::sweep::{SweepReport, REPORT_SCHEMA};

pub const RESULT_SCHEMA: &str = "arcfit/result-v1";
pub const PLOT_SCHEMA: &str = "arcfit/plot-v1";

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("expected schema \"{expected}\", found {found}")]
    WrongSchema { expected: &'static str, found: String },
    #[error("document does not match {schema}: {message}")]
    Shape { schema: &'static str, message: String },
}

/// What was solved, enough to rebuild the problem from the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    /// Approximation arcs `I` as `[start, end]` in radians.
    pub arcs: Vec<(f64, f64)>,
    pub degree: usize,
    pub grid: usize,
    /// Bound per component of `J`.
    pub bounds: Vec<f64>,
    pub constraint_points: usize,
    pub gram_mode: GramMode,
    pub tol: f64,
    pub max_iter: usize,
    pub data_digest: String,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_s: f64,
    pub certify_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema: String,
    pub problem: ProblemSummary,
    pub solve: SolveResult,
    pub certificate: Certificate,
    /// Wall-clock figures; excluded from reproducibility comparisons.
    pub timing: Timing,
}

impl ResultDocument {
    pub fn new(
        instance: &Instance,
        n: usize,
        m: usize,
        outcome: Outcome,
        timing: Timing,
    ) -> Result<Self, InstanceError> {
        Ok(Self {
            schema: RESULT_SCHEMA.to_string(),
            problem: ProblemSummary {
                arcs: instance.arcs.clone().into(),
                degree: n,
                grid: m,
                bounds: instance.component_bounds()?,
                constraint_points: outcome.problem.num_constraints(),
                gram_mode: instance.gram_mode,
                tol: instance.solve.tol,
                max_iter: instance.solve.max_iter,
                data_digest: instance.digest(),
                samples: instance.data.len(),
            },
            solve: outcome.result,
            certificate: outcome.certificate,
            timing,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub theta: Vec<f64>,
    pub modulus: Vec<f64>,
}

/// `|g|` over the whole circle with the data moduli on `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBundle {
    pub schema: String,
    pub degree: usize,
    pub theta: Vec<f64>,
    pub modulus: Vec<f64>,
    pub overlay: Overlay,
    pub arcs_i: Vec<(f64, f64)>,
    pub arcs_j: Vec<(f64, f64)>,
    /// Bound per component of `J`, in the order of `arcs_j`.
    pub bounds: Vec<f64>,
}

/// Number of plot abscissae for degree `n`.
pub fn plot_resolution(n: usize) -> usize {
    (16 * (n + 1)).max(2048)
}

impl PlotBundle {
    pub fn new(arcs: &ArcSystem, bounds: &[f64], c: &[Complex64], data: &SampledBoundaryData) -> Self {
        let count = plot_resolution(c.len().saturating_sub(1));
        let theta: Vec<f64> = (0..count).map(|i| TAU * i as f64 / count as f64).collect();
        let modulus = theta.iter().map(|&t| evaluate(c, t).norm()).collect();
        let arcs_j = arcs.complement().iter().map(|a| (a.start, a.end())).collect();
        Self {
            schema: PLOT_SCHEMA.to_string(),
            degree: c.len().saturating_sub(1),
            theta,
            modulus,
            overlay: Overlay {
                theta: data.samples.iter().map(|s| s.theta).collect(),
                modulus: data.samples.iter().map(|s| s.value.norm()).collect(),
            },
            arcs_i: arcs.clone().into(),
            arcs_j,
            bounds: bounds.to_vec(),
        }
    }
}

fn check_schema(value: &Value, expected: &'static str) -> Result<(), SchemaError> {
    match value.get("schema").and_then(Value::as_str) {
        Some(s) if s == expected => Ok(()),
        Some(s) => Err(SchemaError::WrongSchema { expected, found: format!("\"{s}\"") }),
        None => Err(SchemaError::WrongSchema { expected, found: "no schema field".to_string() }),
    }
}

fn typed<T: DeserializeOwned>(value: &Value, schema: &'static str) -> Result<T, SchemaError> {
    T::deserialize(value).map_err(|e| SchemaError::Shape { schema, message: e.to_string() })
}

fn shape(schema: &'static str, message: impl Into<String>) -> SchemaError {
    SchemaError::Shape { schema, message: message.into() }
}

pub fn validate_result(value: &Value) -> Result<ResultDocument, SchemaError> {
    const S: &str = RESULT_SCHEMA;
    check_schema(value, S)?;
    let doc: ResultDocument = typed(value, S)?;
    if doc.solve.coefficients.len() != doc.problem.degree + 1 {
        return Err(shape(S, "coefficient count does not match the degree"));
    }
    if doc.solve.multipliers.len() != doc.problem.constraint_points {
        return Err(shape(S, "multiplier count does not match the constraint grid"));
    }
    if doc.problem.data_digest.len() != 64 {
        return Err(shape(S, "data digest is not a SHA-256 hex string"));
    }
    Ok(doc)
}

pub fn validate_report(value: &Value) -> Result<SweepReport, SchemaError> {
    const S: &str = REPORT_SCHEMA;
    check_schema(value, S)?;
    let doc: SweepReport = typed(value, S)?;
    if doc.timing.len() != doc.cells.len() {
        return Err(shape(S, "timing entries do not match the cells"));
    }
    Ok(doc)
}

pub fn validate_plot(value: &Value) -> Result<PlotBundle, SchemaError> {
    const S: &str = PLOT_SCHEMA;
    check_schema(value, S)?;
    let doc: PlotBundle = typed(value, S)?;
    if doc.theta.len() != doc.modulus.len() {
        return Err(shape(S, "theta and modulus lengths differ"));
    }
    if doc.overlay.theta.len() != doc.overlay.modulus.len() {
        return Err(shape(S, "overlay theta and modulus lengths differ"));
    }
    if doc.bounds.len() != doc.arcs_j.len() {
        return Err(shape(S, "one bound per constraint arc is required"));
    }
    let moduli = doc.modulus.iter().chain(&doc.overlay.modulus);
    if moduli.clone().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(shape(S, "moduli must be finite and nonnegative"));
    }
    Ok(doc)
}

/// Validate any document by its schema tag.
pub fn validate(value: &Value) -> Result<&'static str, SchemaError> {
    match value.get("schema").and_then(Value::as_str) {
        Some(RESULT_SCHEMA) => validate_result(value).map(|_| RESULT_SCHEMA),
        Some(REPORT_SCHEMA) => validate_report(value).map(|_| REPORT_SCHEMA),
        Some(PLOT_SCHEMA) => validate_plot(value).map(|_| PLOT_SCHEMA),
        other => Err(SchemaError::WrongSchema {
            expected: RESULT_SCHEMA,
            found: other.map(|s| format!("\"{s}\"")).unwrap_or_else(|| "no schema field".to_string()),
        }),
    }
}

/// Remove the `timing` field, for reproducibility comparisons.
pub fn strip_timing(mut value: Value) -> Value {
    if let Some(obj) = value.as_object_mut() {
        obj.remove("timing");
    }
    value
}
