//! Quadratic data of the inner problem: the Gram matrix of monomials on `I`
//! and the moments of the boundary data against those monomials.
//!
//! Inner products carry the `1/2π` normalization, so monomials are
//! orthonormal over the whole circle.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arcgeom::{Arc, ArcSystem};
use crate::linalg::{HermitianCholesky, HermitianToeplitz, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("sample {index} at angle {theta} lies outside the approximation arcs")]
    OutsideI { index: usize, theta: f64 },
    #[error("approximation arc {arc} has {count} samples; at least 2 are required")]
    TooFewSamples { arc: usize, count: usize },
    #[error("sample {index} is not strictly after the previous sample on its arc")]
    NotIncreasing { index: usize },
    #[error("sample {index} has a non-finite value or a nonpositive weight")]
    BadSample { index: usize },
    #[error("Gram matrix of degree {degree} is not usable: {source}")]
    Conditioning {
        degree: usize,
        #[source]
        source: LinalgError,
    },
}

/// One measurement `f(e^{iθ})` with its quadrature weight multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta: f64,
    pub value: Complex64,
    pub weight: f64,
}

/// Samples of the boundary data on `I`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampledBoundaryData {
    pub samples: Vec<Sample>,
    /// Source frequencies in Hz when the data came from a measurement file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
}

impl SampledBoundaryData {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples, frequencies: None }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_unit_weights(&self) -> bool {
        self.samples.iter().all(|s| s.weight == 1.0)
    }

    /// Composite trapezoid rule on the samples of each arc, with the data
    /// weights and the `1/2π` normalization folded in.
    pub fn quadrature(&self, arcs: &ArcSystem) -> Result<QuadratureRule, MomentError> {
        let mut per_arc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); arcs.arcs().len()];
        for (index, s) in self.samples.iter().enumerate() {
            if !s.value.re.is_finite() || !s.value.im.is_finite() || !(s.weight > 0.0) || !s.weight.is_finite() {
                return Err(MomentError::BadSample { index });
            }
            let arc = arcs.locate(s.theta).ok_or(MomentError::OutsideI { index, theta: s.theta })?;
            let off = unwrap_offset(&arcs.arcs()[arc], s.theta);
            if let Some(&(_, prev)) = per_arc[arc].last() {
                if off <= prev {
                    return Err(MomentError::NotIncreasing { index });
                }
            }
            per_arc[arc].push((index, off));
        }
        let mut nodes = Vec::with_capacity(self.samples.len());
        for (arc, pts) in per_arc.iter().enumerate() {
            if pts.len() < 2 {
                return Err(MomentError::TooFewSamples { arc, count: pts.len() });
            }
            let last = pts.len() - 1;
            for (i, &(index, off)) in pts.iter().enumerate() {
                let left = if i == 0 { off } else { pts[i - 1].1 };
                let right = if i == last { off } else { pts[i + 1].1 };
                let s = &self.samples[index];
                nodes.push(QuadratureNode {
                    theta: s.theta,
                    value: s.value,
                    weight: 0.5 * (right - left) * s.weight / TAU,
                });
            }
        }
        Ok(QuadratureRule { nodes })
    }
}

/// Offset from the arc start, with the `ARC_TOL` slack before the start
/// mapped to a small negative number instead of wrapping to `2π`.
fn unwrap_offset(arc: &Arc, theta: f64) -> f64 {
    let off = arc.offset(theta);
    if off > arc.length + crate::arcgeom::ARC_TOL {
        off - TAU
    } else {
        off
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureNode {
    pub theta: f64,
    pub value: Complex64,
    /// Trapezoid weight times data weight, divided by `2π`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<QuadratureNode>,
}

impl QuadratureRule {
    /// Trapezoid rule on a plain set of nodes with unit data weight, for
    /// integrating known functions.
    pub fn uniform_on(arcs: &ArcSystem, nodes_total: usize) -> Self {
        let total = arcs.measure();
        let mut nodes = Vec::with_capacity(nodes_total + arcs.arcs().len());
        for arc in arcs.arcs() {
            let k = ((nodes_total as f64 * arc.length / total).round() as usize).max(2) - 1;
            let h = arc.length / k as f64;
            for i in 0..=k {
                let w = if i == 0 || i == k { 0.5 * h } else { h };
                nodes.push(QuadratureNode {
                    theta: arc.start + h * i as f64,
                    value: Complex64::new(0.0, 0.0),
                    weight: w / TAU,
                });
            }
        }
        Self { nodes }
    }
}

/// `G[j][k] = <z^k, z^j>_I` for `0 <= j, k <= n`, Hermitian Toeplitz.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    toeplitz: HermitianToeplitz,
}

impl GramMatrix {
    pub fn from_first_row(row: Vec<Complex64>) -> Self {
        Self { toeplitz: HermitianToeplitz::new(row) }
    }

    pub fn degree(&self) -> usize {
        self.toeplitz.dim() - 1
    }

    pub fn dim(&self) -> usize {
        self.toeplitz.dim()
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.toeplitz.get(j, k)
    }

    /// `row[d] = G[j][j + d]`.
    pub fn first_row(&self) -> &[Complex64] {
        self.toeplitz.first_row()
    }

    pub fn toeplitz(&self) -> &HermitianToeplitz {
        &self.toeplitz
    }

    pub fn mul_vec(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.toeplitz.mul_vec(c)
    }

    /// `c* G c = ||g||^2_{L²(I)}` for `g = Σ c_j z^j`.
    pub fn quadratic_form(&self, c: &[Complex64]) -> f64 {
        self.toeplitz.quadratic_form(c)
    }

    /// Cholesky factorization with the conditioning guard.
    pub fn factor(&self) -> Result<HermitianCholesky, MomentError> {
        HermitianCholesky::factor(self.toeplitz.to_dense(), self.dim())
            .map_err(|source| MomentError::Conditioning { degree: self.degree(), source })
    }
}

/// Moments `b[j] = <f, z^j>_I` and `||f||²_{L²(I)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub b: Vec<Complex64>,
    pub norm_sq: f64,
}

impl MomentVector {
    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }
}

/// `(1/2π) ∫_I e^{idθ} dθ` for `d >= 0`.
fn arc_integral(arcs: &ArcSystem, d: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for arc in arcs.arcs() {
        if d == 0 {
            acc += arc.length;
        } else {
            let df = d as f64;
            // (e^{idb} - e^{ida}) / (id), written as e^{id(a+b)/2} * 2 sin(dL/2) / d
            let mid = arc.start + 0.5 * arc.length;
            acc += Complex64::cis(df * mid) * (2.0 * (0.5 * df * arc.length).sin() / df);
        }
    }
    acc / TAU
}

/// Exact Gram matrix of `1, z, …, z^n` over the arcs of `I`.
pub fn gram_closed_form(arcs: &ArcSystem, n: usize) -> GramMatrix {
    GramMatrix::from_first_row((0..=n).map(|d| arc_integral(arcs, d)).collect())
}

/// Gram matrix under a quadrature rule (weighted or discrete inner product).
pub fn gram_from_quadrature(rule: &QuadratureRule, n: usize) -> GramMatrix {
    let mut row = vec![Complex64::new(0.0, 0.0); n + 1];
    for node in &rule.nodes {
        for (d, r) in row.iter_mut().enumerate() {
            *r += Complex64::cis(d as f64 * node.theta) * node.weight;
        }
    }
    GramMatrix::from_first_row(row)
}

/// Trapezoid moments of the data against `1, z, …, z^n`.
pub fn moments_from_quadrature(rule: &QuadratureRule, n: usize) -> MomentVector {
    let mut b = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut norm_sq = 0.0;
    for node in &rule.nodes {
        norm_sq += node.weight * node.value.norm_sqr();
        for (j, bj) in b.iter_mut().enumerate() {
            *bj += node.value * Complex64::cis(-(j as f64) * node.theta) * node.weight;
        }
    }
    MomentVector { b, norm_sq }
}

pub fn moments_from_samples(
    data: &SampledBoundaryData,
    arcs: &ArcSystem,
    n: usize,
) -> Result<MomentVector, MomentError> {
    Ok(moments_from_quadrature(&data.quadrature(arcs)?, n))
}

/// Which Gram matrix the solver pairs with sampled moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramMode {
    /// Same trapezoid rule as the moments; the misfit is then exactly the
    /// discrete weighted L² misfit on the samples.
    #[default]
    Quadrature,
    /// Exact integrals over the arcs. Only used when all weights are 1.
    ClosedForm,
}

/// Gram matrix and moments for one degree.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticData {
    pub gram: GramMatrix,
    pub moments: MomentVector,
}

pub fn assemble(
    data: &SampledBoundaryData,
    arcs: &ArcSystem,
    n: usize,
    mode: GramMode,
) -> Result<QuadraticData, MomentError> {
    let rule = data.quadrature(arcs)?;
    let moments = moments_from_quadrature(&rule, n);
    let gram = match mode {
        GramMode::ClosedForm if data.has_unit_weights() => gram_closed_form(arcs, n),
        _ => gram_from_quadrature(&rule, n),
    };
    Ok(QuadraticData { gram, moments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled(arcs: &ArcSystem, per_arc: usize, f: impl Fn(f64) -> Complex64) -> SampledBoundaryData {
        let mut samples = Vec::new();
        for arc in arcs.arcs() {
            for i in 0..per_arc {
                let t = arc.start + arc.length * i as f64 / (per_arc - 1) as f64;
                samples.push(Sample { theta: t, value: f(t), weight: 1.0 });
            }
        }
        SampledBoundaryData::new(samples)
    }

    #[test]
    fn full_circle_minus_point_is_identity() {
        // J must have interior, so leave out a sliver of width 1e-9
        let arcs = ArcSystem::new(&[(0.0, TAU - 1e-9)]).unwrap();
        let g = gram_closed_form(&arcs, 6);
        for j in 0..=6 {
            for k in 0..=6 {
                let e = if j == k { 1.0 } else { 0.0 };
                assert!((g.get(j, k) - e).norm() < 1e-9, "{j},{k}: {}", g.get(j, k));
            }
        }
    }

    #[test]
    fn half_circle_entries() {
        let arcs = ArcSystem::new(&[(0.0, PI)]).unwrap();
        let g = gram_closed_form(&arcs, 3);
        assert!((g.get(0, 0).re - 0.5).abs() < 1e-15);
        // G[j][j+1] = (1/2π)∫_0^π e^{iθ} dθ = i/π
        assert!((g.get(0, 1) - Complex64::new(0.0, 1.0 / PI)).norm() < 1e-15);
        assert!((g.get(1, 0) - Complex64::new(0.0, -1.0 / PI)).norm() < 1e-15);
        // even offsets vanish on the half circle
        assert!(g.get(0, 2).norm() < 1e-15);
        let g0 = gram_closed_form(&arcs, 0);
        assert_eq!(g0.dim(), 1);
        assert!((g0.get(0, 0).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_data_gives_zero_moments() {
        let arcs = ArcSystem::new(&[(0.0, 2.0)]).unwrap();
        let data = sampled(&arcs, 20, |_| Complex64::new(0.0, 0.0));
        let m = moments_from_samples(&data, &arcs, 4).unwrap();
        assert_eq!(m.norm_sq, 0.0);
        assert!(m.b.iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn constant_data_reproduces_gram_row_second_order() {
        let arcs = ArcSystem::new(&[(0.3, 2.4), (3.0, 5.0)]).unwrap();
        let n = 5;
        let g = gram_closed_form(&arcs, n);
        let err = |s: usize| {
            let data = sampled(&arcs, s, |_| Complex64::new(1.0, 0.0));
            let m = moments_from_samples(&data, &arcs, n).unwrap();
            (0..=n).map(|j| (m.b[j] - g.get(j, 0)).norm()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn exponential_data_first_moment() {
        let arcs = ArcSystem::new(&[(0.5, 2.5)]).unwrap();
        let data = sampled(&arcs, 401, Complex64::cis);
        let m = moments_from_samples(&data, &arcs, 2).unwrap();
        // |e^{iθ}|² = 1, so the trapezoid value is exact for b[1]
        assert!((m.b[1] - Complex64::new(2.0 / TAU, 0.0)).norm() < 1e-14);
        assert!((m.norm_sq - 2.0 / TAU).abs() < 1e-14);
    }

    #[test]
    fn moments_satisfy_cauchy_schwarz() {
        let arcs = ArcSystem::new(&[(1.0, 4.0)]).unwrap();
        let data = sampled(&arcs, 300, |t| Complex64::new(t.sin() * 3.0, t * t));
        let m = moments_from_samples(&data, &arcs, 10).unwrap();
        let bound = m.norm() * (arcs.measure() / TAU).sqrt();
        for b in &m.b {
            assert!(b.norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sample_validation() {
        let arcs = ArcSystem::new(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        let one = |t| Sample { theta: t, value: Complex64::new(1.0, 0.0), weight: 1.0 };
        let data = SampledBoundaryData::new(vec![one(0.1), one(0.5), one(2.5)]);
        assert_eq!(data.quadrature(&arcs).unwrap_err(), MomentError::TooFewSamples { arc: 1, count: 1 });
        let data = SampledBoundaryData::new(vec![one(0.1), one(1.5)]);
        assert!(matches!(data.quadrature(&arcs), Err(MomentError::OutsideI { index: 1, .. })));
        let data = SampledBoundaryData::new(vec![one(0.5), one(0.1)]);
        assert!(matches!(data.quadrature(&arcs), Err(MomentError::NotIncreasing { index: 1 })));
        let mut bad = one(0.2);
        bad.weight = 0.0;
        let data = SampledBoundaryData::new(vec![one(0.1), bad]);
        assert!(matches!(data.quadrature(&arcs), Err(MomentError::BadSample { index: 1 })));
    }

    #[test]
    fn wraparound_arc_quadrature() {
        let arcs = ArcSystem::new(&[(1.5 * PI, 2.5 * PI)]).unwrap();
        let data = sampled(&arcs, 201, |_| Complex64::new(1.0, 0.0));
        let rule = data.quadrature(&arcs).unwrap();
        let total: f64 = rule.nodes.iter().map(|n| n.weight).sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gram_positive_definite_and_shrinks_with_i() {
        // nested arcs around π; smallest pivot of the factorization decreases
        let mut last = f64::INFINITY;
        for half in [1.2, 0.9, 0.6] {
            let arcs = ArcSystem::new(&[(PI - half, PI + half)]).unwrap();
            let g = gram_closed_form(&arcs, 6);
            let chol = g.factor().expect("Gram matrix must be positive definite");
            let piv = chol.min_relative_pivot();
            assert!(piv < last);
            last = piv;
        }
    }

    #[test]
    fn tiny_arc_high_degree_is_flagged() {
        let arcs = ArcSystem::new(&[(0.0, 0.05)]).unwrap();
        let g = gram_closed_form(&arcs, 40);
        assert!(matches!(g.factor(), Err(MomentError::Conditioning { degree: 40, .. })));
    }
}
