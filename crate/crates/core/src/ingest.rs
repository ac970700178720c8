//! Measurement files and synthetic test data.
//!
//! Measurement format (`# arcfit-measurements v1`): optional `# key: value`
//! metadata lines, then a CSV header `freq_hz,re,im` with an optional
//! trailing `weight` column, then one row per frequency in strictly
//! increasing order.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arcgeom::{map_frequencies, ArcSystem, FrequencyMap, GeometryError};
use crate::moments::{Sample, SampledBoundaryData};

pub const MEASUREMENT_MAGIC: &str = "# arcfit-measurements v1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line 1: expected header `{MEASUREMENT_MAGIC}`")]
    MissingMagic,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error("line {line}: frequency {freq} is not greater than the previous row")]
    NotIncreasing { line: usize, freq: f64 },
    #[error("line {line}: frequency {freq} Hz is outside the band [{f_lo}, {f_hi}]")]
    OutOfBand { line: usize, freq: f64, f_lo: f64, f_hi: f64 },
    #[error("cannot write measurements without source frequencies")]
    NoFrequencies,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRow {
    pub freq_hz: f64,
    pub value: Complex64,
    pub weight: Option<f64>,
    /// 1-based line in the source file.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementFile {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<MeasurementRow>,
}

/// Parse the text of a measurement file.
pub fn parse_measurements(text: &str) -> Result<MeasurementFile, IngestError> {
    let mut lines = text.split_inclusive('\n');
    match lines.next() {
        Some(first) if first.trim() == MEASUREMENT_MAGIC => {}
        _ => return Err(IngestError::MissingMagic),
    }
    let mut metadata = Vec::new();
    let mut consumed = 1;
    let mut rest_start = text.find('\n').map(|i| i + 1).unwrap_or(text.len());
    for line in lines {
        let Some(meta) = line.trim_start().strip_prefix('#') else { break };
        if let Some((k, v)) = meta.split_once(':') {
            metadata.push((k.trim().to_string(), v.trim().to_string()));
        }
        consumed += 1;
        rest_start += line.len();
    }
    let body = &text[rest_start..];

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header_line = consumed + 1;
    let headers =
        reader.headers().map_err(|e| IngestError::Malformed { line: header_line, message: e.to_string() })?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let weighted = match names.as_slice() {
        ["freq_hz", "re", "im"] => false,
        ["freq_hz", "re", "im", "weight"] => true,
        _ => {
            return Err(IngestError::Malformed {
                line: header_line,
                message: format!("expected columns freq_hz,re,im[,weight], found {}", names.join(",")),
            })
        }
    };

    let mut rows: Vec<MeasurementRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize + consumed).unwrap_or(0);
            IngestError::Malformed { line, message: e.to_string() }
        })?;
        let line = record.position().map(|p| p.line() as usize + consumed).unwrap_or(0);
        let field = |i: usize| -> Result<f64, IngestError> {
            let raw = record.get(i).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| IngestError::Malformed { line, message: format!("cannot parse `{raw}` as a number") })?;
            if !v.is_finite() {
                return Err(IngestError::NonFinite { line });
            }
            Ok(v)
        };
        let freq_hz = field(0)?;
        let value = Complex64::new(field(1)?, field(2)?);
        let weight = if weighted {
            let w = field(3)?;
            if w <= 0.0 {
                return Err(IngestError::Malformed { line, message: format!("weight {w} must be positive") });
            }
            Some(w)
        } else {
            None
        };
        if let Some(prev) = rows.last() {
            if freq_hz <= prev.freq_hz {
                return Err(IngestError::NotIncreasing { line, freq: freq_hz });
            }
        }
        rows.push(MeasurementRow { freq_hz, value, weight, line });
    }
    Ok(MeasurementFile { metadata, rows })
}

/// Map a parsed file onto the circle.
pub fn to_boundary_data(file: &MeasurementFile, map: &FrequencyMap) -> Result<SampledBoundaryData, IngestError> {
    let freqs: Vec<f64> = file.rows.iter().map(|r| r.freq_hz).collect();
    let angles = map_frequencies(&freqs, map).map_err(|e| match e {
        GeometryError::OutOfBand { index, freq, f_lo, f_hi } => {
            IngestError::OutOfBand { line: file.rows[index].line, freq, f_lo, f_hi }
        }
        other => other.into(),
    })?;
    let samples = file
        .rows
        .iter()
        .zip(angles)
        .map(|(r, theta)| Sample {
            theta: crate::arcgeom::canonical_angle(theta),
            value: r.value,
            weight: r.weight.unwrap_or(1.0),
        })
        .collect();
    Ok(SampledBoundaryData { samples, frequencies: Some(freqs) })
}

pub fn load_measurements(path: &Path, map: &FrequencyMap) -> Result<SampledBoundaryData, IngestError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    to_boundary_data(&parse_measurements(&text)?, map)
}

/// Concatenate data from several files (e.g. one per approximation arc).
pub fn merge(parts: Vec<SampledBoundaryData>) -> SampledBoundaryData {
    let mut out = SampledBoundaryData::default();
    let mut freqs = Some(Vec::new());
    for p in parts {
        out.samples.extend(p.samples);
        match (&mut freqs, p.frequencies) {
            (Some(acc), Some(f)) => acc.extend(f),
            _ => freqs = None,
        }
    }
    out.frequencies = freqs;
    out
}

/// Canonical text of a measurement file, 17 significant digits per value.
/// The weight column is written only when some weight differs from 1.
pub fn format_measurements(data: &SampledBoundaryData) -> Result<String, IngestError> {
    let freqs = data.frequencies.as_ref().ok_or(IngestError::NoFrequencies)?;
    let weighted = !data.has_unit_weights();
    let mut out = String::new();
    out.push_str(MEASUREMENT_MAGIC);
    out.push('\n');
    out.push_str(if weighted { "freq_hz,re,im,weight\n" } else { "freq_hz,re,im\n" });
    for (s, f) in data.samples.iter().zip(freqs) {
        let _ = write!(out, "{f:.16e},{:.16e},{:.16e}", s.value.re, s.value.im);
        if weighted {
            let _ = write!(out, ",{:.16e}", s.weight);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_measurements(path: &Path, data: &SampledBoundaryData) -> Result<(), IngestError> {
    let text = format_measurements(data)?;
    std::fs::write(path, text).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// A complex number written as `[re, im]` in config files.
pub type ComplexPair = [f64; 2];

fn cpx(p: &ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// Synthetic boundary data definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticCase {
    /// `f ≡ value`.
    Constant { value: ComplexPair },
    /// Trace of `Σ c_j z^j`.
    PolynomialTrace { coefficients: Vec<ComplexPair> },
    /// `scale · Π (z - a_k) / (1 - conj(a_k) z)` with `|a_k| < 1`.
    BlaschkeLike { zeros: Vec<ComplexPair>, scale: f64 },
    /// `Σ p_j z^j / Σ q_j z^j`.
    Rational { numerator: Vec<ComplexPair>, denominator: Vec<ComplexPair> },
    /// Reflection-type response: zeros on the circle spread over the first
    /// approximation arc, poles just outside the disk behind them, scaled so
    /// that the peak modulus on the circle equals `level`.
    Filterlike {
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_pole_offset")]
        pole_offset: f64,
        #[serde(default = "default_level")]
        level: f64,
    },
}

fn default_order() -> usize {
    6
}
fn default_pole_offset() -> f64 {
    0.15
}
fn default_level() -> f64 {
    1.0
}

fn horner(coeffs: &[ComplexPair], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + cpx(c))
}

impl SyntheticCase {
    /// Evaluator for `f` on the circle, given the arcs it will be sampled on.
    pub fn evaluator(&self, arcs: &ArcSystem) -> Box<dyn Fn(Complex64) -> Complex64 + Send + Sync> {
        match self.clone() {
            SyntheticCase::Constant { value } => Box::new(move |_| cpx(&value)),
            SyntheticCase::PolynomialTrace { coefficients } => Box::new(move |z| horner(&coefficients, z)),
            SyntheticCase::BlaschkeLike { zeros, scale } => Box::new(move |z| {
                zeros.iter().fold(Complex64::new(scale, 0.0), |acc, a| {
                    let a = cpx(a);
                    acc * (z - a) / (Complex64::new(1.0, 0.0) - a.conj() * z)
                })
            }),
            SyntheticCase::Rational { numerator, denominator } => {
                Box::new(move |z| horner(&numerator, z) / horner(&denominator, z))
            }
            SyntheticCase::Filterlike { order, pole_offset, level } => {
                let band = arcs.arcs()[0];
                let mid = band.start + 0.5 * band.length;
                let half = 0.5 * band.length;
                let angles: Vec<f64> = (0..order)
                    .map(|k| mid + 0.9 * half * ((2 * k + 1) as f64 * PI / (2 * order) as f64).cos())
                    .collect();
                let zeros: Vec<Complex64> = angles.iter().map(|&t| Complex64::cis(t)).collect();
                let poles: Vec<Complex64> =
                    angles.iter().map(|&t| Complex64::from_polar(1.0 + pole_offset, t)).collect();
                let raw = move |z: Complex64| {
                    zeros.iter().zip(&poles).fold(Complex64::new(1.0, 0.0), |acc, (zk, pk)| acc * (z - zk) / (z - pk))
                };
                let peak =
                    (0..8192).map(|i| raw(Complex64::cis(i as f64 * 2.0 * PI / 8192.0)).norm()).fold(0.0, f64::max);
                let gain = level / peak;
                Box::new(move |z| raw(z) * gain)
            }
        }
    }
}

/// Sample `f` on a uniform grid of `density` points per arc, endpoints
/// included.
pub fn sample_function(arcs: &ArcSystem, density: usize, f: impl Fn(Complex64) -> Complex64) -> SampledBoundaryData {
    let density = density.max(2);
    let mut samples = Vec::with_capacity(density * arcs.arcs().len());
    for arc in arcs.arcs() {
        for i in 0..density {
            let t = if i + 1 == density { arc.end() } else { arc.start + arc.length * i as f64 / (density - 1) as f64 };
            let theta = crate::arcgeom::canonical_angle(t);
            samples.push(Sample { theta, value: f(Complex64::cis(theta)), weight: 1.0 });
        }
    }
    SampledBoundaryData::new(samples)
}

pub fn generate_synthetic(case: &SyntheticCase, arcs: &ArcSystem, density: usize) -> SampledBoundaryData {
    let f = case.evaluator(arcs);
    sample_function(arcs, density, f)
}
