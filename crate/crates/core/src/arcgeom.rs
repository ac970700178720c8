//! Arc systems on the unit circle, constraint grids on the complementary
//! arcs, and the affine frequency-to-angle map used for measured data.
//!
//! Angles are radians. Stored angles are canonicalized to `[0, 2π)`; an arc
//! is kept as a canonical start plus a positive length so that arcs crossing
//! angle zero need no special casing.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for arc membership tests, in radians.
pub const ARC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("arc system must contain at least one arc")]
    NoArcs,
    #[error("arc {index} is degenerate or malformed: ({start}, {end})")]
    BadArc { index: usize, start: f64, end: f64 },
    #[error("arcs {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
    #[error("approximation arcs cover the whole circle; the constraint set has empty interior")]
    EmptyComplement,
    #[error("grid resolution must be at least 1")]
    ZeroResolution,
    #[error("frequency map is degenerate: [{f_lo}, {f_hi}] -> [{theta_lo}, {theta_hi}]")]
    BadFrequencyMap { f_lo: f64, f_hi: f64, theta_lo: f64, theta_hi: f64 },
    #[error("frequency {freq} Hz at index {index} lies outside the band [{f_lo}, {f_hi}]")]
    OutOfBand { index: usize, freq: f64, f_lo: f64, f_hi: f64 },
}

/// Reduce an angle to `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Shortest distance between two angles on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = canonical_angle(a - b);
    d.min(TAU - d)
}

/// A closed arc `[start, start + length]` of the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    /// Offset of `theta` from the arc start, measured counterclockwise in `[0, 2π)`.
    pub fn offset(&self, theta: f64) -> f64 {
        canonical_angle(theta - self.start)
    }

    /// Membership in the closed arc, with [`ARC_TOL`] slack at both ends.
    pub fn contains_closed(&self, theta: f64) -> bool {
        let off = self.offset(theta);
        off <= self.length + ARC_TOL || off >= TAU - ARC_TOL
    }

    /// Membership in the open arc, shrunk by [`ARC_TOL`] at both ends.
    pub fn contains_interior(&self, theta: f64) -> bool {
        let off = self.offset(theta);
        off > ARC_TOL && off < self.length - ARC_TOL
    }
}

/// The approximation set `I` as a finite union of disjoint arcs. The
/// constraint set `J` is its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ArcSystem {
    arcs: Vec<Arc>,
}

impl ArcSystem {
    /// Build from `(a_i, b_i)` pairs in radians with `a_i < b_i` and
    /// `b_i - a_i < 2π`. Arcs are sorted by canonical start.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self, GeometryError> {
        if pairs.is_empty() {
            return Err(GeometryError::NoArcs);
        }
        let mut arcs = Vec::with_capacity(pairs.len());
        for (index, &(start, end)) in pairs.iter().enumerate() {
            let length = end - start;
            if !start.is_finite() || !end.is_finite() || length <= 0.0 || length >= TAU {
                return Err(GeometryError::BadArc { index, start, end });
            }
            arcs.push((index, Arc { start: canonical_angle(start), length }));
        }
        arcs.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));

        let total: f64 = arcs.iter().map(|(_, a)| a.length).sum();
        if total >= TAU - ARC_TOL {
            // either overlapping or a full cover; report overlap when there is one
            if let Some(pair) = first_overlap(&arcs) {
                return Err(pair);
            }
            return Err(GeometryError::EmptyComplement);
        }
        if let Some(pair) = first_overlap(&arcs) {
            return Err(pair);
        }
        Ok(Self { arcs: arcs.into_iter().map(|(_, a)| a).collect() })
    }

    /// Build from endpoints expressed in units of π.
    pub fn from_pi_units(pairs: &[(f64, f64)]) -> Result<Self, GeometryError> {
        let scaled: Vec<_> = pairs.iter().map(|&(a, b)| (a * std::f64::consts::PI, b * std::f64::consts::PI)).collect();
        Self::new(&scaled)
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Total length of `I` in radians.
    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|a| a.length).sum()
    }

    /// Connected components of `J`, in order of canonical start. Components
    /// shorter than [`ARC_TOL`] (touching approximation arcs) are dropped.
    pub fn complement(&self) -> Vec<Arc> {
        let k = self.arcs.len();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let cur = self.arcs[i];
            let next = self.arcs[(i + 1) % k];
            let gap_end = if i + 1 < k { next.start } else { next.start + TAU };
            let length = gap_end - cur.end();
            if length > ARC_TOL {
                out.push(Arc { start: canonical_angle(cur.end()), length });
            }
        }
        out.sort_by(|a, b| a.start.total_cmp(&b.start));
        out
    }

    /// Index of the arc of `I` whose closure contains `theta`.
    pub fn locate(&self, theta: f64) -> Option<usize> {
        self.arcs.iter().position(|a| a.contains_closed(theta))
    }

    pub fn in_interior_of_i(&self, theta: f64) -> bool {
        self.arcs.iter().any(|a| a.contains_interior(theta))
    }
}

fn first_overlap(arcs: &[(usize, Arc)]) -> Option<GeometryError> {
    let k = arcs.len();
    for i in 0..k {
        let (ia, a) = arcs[i];
        let (ib, b) = arcs[(i + 1) % k];
        let next_start = if i + 1 < k { b.start } else { b.start + TAU };
        if k > 1 && a.end() > next_start + ARC_TOL {
            return Some(GeometryError::Overlap { first: ia, second: ib });
        }
    }
    None
}

impl TryFrom<Vec<(f64, f64)>> for ArcSystem {
    type Error = GeometryError;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        ArcSystem::new(&v)
    }
}

impl From<ArcSystem> for Vec<(f64, f64)> {
    fn from(s: ArcSystem) -> Self {
        s.arcs.iter().map(|a| (a.start, a.end())).collect()
    }
}

/// Discretization `J_m` of the constraint arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintGrid {
    points: Vec<f64>,
    component: Vec<usize>,
    components: Vec<GridComponent>,
    m: usize,
    spacing: f64,
}

/// One connected component of `J` and the grid laid on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridComponent {
    pub arc: Arc,
    /// Number of grid intervals; the component carries `intervals + 1` points.
    pub intervals: usize,
    pub spacing: f64,
}

impl ConstraintGrid {
    /// Angles `t_k` in `[0, 2π)`, ordered by component then counterclockwise.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest gap between consecutive points within a component. Infinite
    /// for grids built from arbitrary points.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index into [`components`](Self::components) for every point.
    pub fn component_of(&self) -> &[usize] {
        &self.component
    }

    pub fn components(&self) -> &[GridComponent] {
        &self.components
    }

    /// Whether the grid covers each component of `J` end to end.
    pub fn covers_complement(&self) -> bool {
        self.spacing.is_finite()
    }

    /// A grid made of arbitrary constraint points. Such a grid carries no
    /// coverage guarantee, so continuum certification is unavailable.
    pub fn from_points(points: &[f64]) -> Self {
        let points: Vec<f64> = points.iter().map(|&t| canonical_angle(t)).collect();
        Self {
            component: vec![0; points.len()],
            components: Vec::new(),
            m: points.len().saturating_sub(1),
            spacing: f64::INFINITY,
            points,
        }
    }

    /// Per-point bounds from one bound per component of `J`.
    pub fn expand_bounds(&self, per_component: &[f64]) -> Vec<f64> {
        self.component.iter().map(|&c| per_component.get(c).copied().unwrap_or(per_component[0])).collect()
    }
}

/// Uniform grid on every component of `J`, endpoints included, with the `m`
/// grid intervals split across components in proportion to their lengths
/// (largest remainder, at least one interval each).
pub fn build_constraint_grid(arcs: &ArcSystem, m: usize) -> Result<ConstraintGrid, GeometryError> {
    if m == 0 {
        return Err(GeometryError::ZeroResolution);
    }
    let comps = arcs.complement();
    if comps.is_empty() {
        return Err(GeometryError::EmptyComplement);
    }
    let total: f64 = comps.iter().map(|c| c.length).sum();
    let quotas: Vec<f64> = comps.iter().map(|c| m as f64 * c.length / total).collect();
    let mut intervals: Vec<usize> = quotas.iter().map(|q| (q.floor() as usize).max(1)).collect();
    let assigned: usize = intervals.iter().sum();
    if assigned < m {
        let mut order: Vec<usize> = (0..comps.len()).collect();
        // largest fractional remainder first, ties to the earlier component
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(m - assigned) {
            intervals[i] += 1;
        }
    }

    let mut points = Vec::new();
    let mut component = Vec::new();
    let mut components = Vec::with_capacity(comps.len());
    let mut spacing = 0.0f64;
    for (ci, (arc, &k)) in comps.iter().zip(&intervals).enumerate() {
        let h = arc.length / k as f64;
        spacing = spacing.max(h);
        for i in 0..=k {
            let t = if i == k { arc.end() } else { arc.start + arc.length * i as f64 / k as f64 };
            points.push(canonical_angle(t));
            component.push(ci);
        }
        components.push(GridComponent { arc: *arc, intervals: k, spacing: h });
    }
    Ok(ConstraintGrid { points, component, components, m, spacing })
}

/// Affine map from a physical frequency band onto an arc of `I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub f_lo: f64,
    pub f_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl FrequencyMap {
    pub fn new(f_lo: f64, f_hi: f64, theta_lo: f64, theta_hi: f64) -> Result<Self, GeometryError> {
        let ok = [f_lo, f_hi, theta_lo, theta_hi].iter().all(|v| v.is_finite()) && f_hi > f_lo && theta_hi != theta_lo;
        if !ok {
            return Err(GeometryError::BadFrequencyMap { f_lo, f_hi, theta_lo, theta_hi });
        }
        Ok(Self { f_lo, f_hi, theta_lo, theta_hi })
    }

    fn band_slack(&self) -> f64 {
        1e-12 * (self.f_hi - self.f_lo)
    }

    /// Image of one in-band frequency (not canonicalized).
    pub fn angle(&self, freq: f64) -> f64 {
        let s = (freq - self.f_lo) / (self.f_hi - self.f_lo);
        self.theta_lo + s * (self.theta_hi - self.theta_lo)
    }

    /// Inverse of [`angle`](Self::angle).
    pub fn frequency(&self, theta: f64) -> f64 {
        let s = (theta - self.theta_lo) / (self.theta_hi - self.theta_lo);
        self.f_lo + s * (self.f_hi - self.f_lo)
    }
}

/// Map frequencies (Hz) to angles, rejecting the first out-of-band entry.
pub fn map_frequencies(freqs: &[f64], map: &FrequencyMap) -> Result<Vec<f64>, GeometryError> {
    let slack = map.band_slack();
    freqs
        .iter()
        .enumerate()
        .map(|(index, &freq)| {
            if !(freq >= map.f_lo - slack && freq <= map.f_hi + slack) {
                return Err(GeometryError::OutOfBand { index, freq, f_lo: map.f_lo, f_hi: map.f_hi });
            }
            Ok(map.angle(freq))
        })
        .collect()
}
