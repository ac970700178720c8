//! Optimality certificates for solutions of the discretized problem.
//!
//! A certificate checks the critical point equation in moment coordinates,
//! feasibility and complementary slackness on the grid, the bound on the
//! total multiplier mass, and bounds `|g|` between grid points with
//! Bernstein's inequality `||g'||_∞ <= n ||g||_∞`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dualsolver::Problem;

/// `g(e^{iθ}) = Σ_j c_j e^{ijθ}`.
pub fn evaluate(c: &[Complex64], theta: f64) -> Complex64 {
    let z = Complex64::cis(theta);
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, cj| acc * z + cj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Relative KKT tolerance of the solve, scaled by `max(1, ||f||²)`.
    pub kkt_tol: f64,
    pub stationarity_tol: f64,
    /// Subdivisions per grid interval for the refined sup-norm bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { kkt_tol: 1e-8, stationarity_tol: 1e-7, refine: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    GridFeasibleOnly,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalPoint {
    pub angle: f64,
    pub modulus: f64,
    pub multiplier: f64,
    /// Multiplier divided by the local grid spacing. Diagnostic only.
    pub density: Option<f64>,
}

/// Upper bound of `|g|` over `J` from grid values and Bernstein's inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNormBound {
    /// `max_k |g(x_k)|`.
    pub grid_max: f64,
    /// Bound on `||g||_{L^∞(T)}` entering the derivative estimate.
    pub coefficient_bound: f64,
    /// Certified bound on `sup_J |g|`; absent when the grid carries no
    /// coverage guarantee.
    pub bound: Option<f64>,
    /// `max` over grid intervals of (interval bound − ρ).
    pub margin: Option<f64>,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub stationarity_residual: f64,
    /// Certified `sup_J |g| − ρ`; absent when continuum coverage is unknown.
    pub feasibility_margin: Option<f64>,
    pub sup_norm: SupNormBound,
    /// `Σ λ_k`.
    pub multiplier_sum: f64,
    /// `Σ λ_k ρ_k²`.
    pub multiplier_mass: f64,
    pub multiplier_bound_ok: bool,
    /// `max_k (|g(x_k)|² − ρ_k²)`, unscaled.
    pub max_grid_violation: f64,
    /// `max_k λ_k |ρ_k² − |g(x_k)|²|`, unscaled.
    pub complementarity: f64,
    pub extremal_points: Vec<ExtremalPoint>,
    /// `2n + 2`, the size of some multiplier representation; reported only.
    pub cardinality_bound: usize,
    /// Grid size expected to certify the bound when it is not yet certified.
    pub suggested_grid: Option<usize>,
    pub reasons: Vec<String>,
}

/// `max_j |(Gc − b + Σ_k λ_k g(x_k) v_k)_j| / max(1, ||f||)`.
pub fn check_stationarity(problem: &Problem, c: &[Complex64], lambda: &[f64]) -> f64 {
    let mut r = problem.gram().mul_vec(c);
    for (rj, bj) in r.iter_mut().zip(&problem.moments().b) {
        *rj -= bj;
    }
    let values = problem.grid_values(c);
    for (k, (&l, g)) in lambda.iter().zip(&values).enumerate() {
        if l != 0.0 {
            for (rj, e) in r.iter_mut().zip(problem.eval_row(k)) {
                *rj += e.conj() * g * l;
            }
        }
    }
    let worst = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    worst / problem.moments().norm().max(1.0)
}

/// `Σ λ_k ρ_k² <= 2 ||f||² (1 + 1e-9)`.
pub fn check_multiplier_bound(lambda: &[f64], bounds: &[f64], norm_f_sq: f64) -> bool {
    let mass: f64 = lambda.iter().zip(bounds).map(|(l, r)| l * r * r).sum();
    mass <= 2.0 * norm_f_sq * (1.0 + 1e-9)
}

/// Grid points carrying a multiplier above `tol`.
pub fn extract_extremal_points(problem: &Problem, c: &[Complex64], lambda: &[f64], tol: f64) -> Vec<ExtremalPoint> {
    let grid = problem.grid();
    let comps = grid.components();
    lambda
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > tol)
        .map(|(k, &l)| {
            let angle = grid.points()[k];
            let density = comps.get(grid.component_of()[k]).map(|comp| l / comp.spacing);
            ExtremalPoint { angle, modulus: evaluate(c, angle).norm(), multiplier: l, density }
        })
        .collect()
}

/// Activity threshold `1e-10 · max(1, Σλ)`.
pub fn activity_tolerance(lambda: &[f64]) -> f64 {
    1e-10 * lambda.iter().sum::<f64>().max(1.0)
}

/// Bound `sup_J |g|` interval by interval. On an interval of length `h`
/// with end values `a`, `b` and Lipschitz constant `L = n·B` for `|g|`,
/// `|g| <= (a + b + L h) / 2`, which never exceeds `max_k |g(x_k)| + L h / 2`
/// and never grows when the grid is refined.
///
/// With `refine = Some(K)`, `B` is sharpened by sampling the whole circle and
/// each interval is split into `K` pieces before the same bound is applied.
pub fn certify_sup_norm(problem: &Problem, c: &[Complex64], refine: Option<usize>) -> SupNormBound {
    let grid = problem.grid();
    // Bernstein's constant is the actual degree of g
    let n = c.iter().rposition(|v| *v != Complex64::new(0.0, 0.0)).unwrap_or(0);
    let values: Vec<f64> = problem.grid_values(c).iter().map(|v| v.norm()).collect();
    let grid_max = values.iter().copied().fold(0.0, f64::max);
    let mut coefficient_bound: f64 = c.iter().map(|v| v.norm()).sum();
    let refine = refine.filter(|&k| k > 1 && n > 0);
    if refine.is_some() {
        coefficient_bound = coefficient_bound.min(circle_bound(c, n));
    }
    if !grid.covers_complement() {
        return SupNormBound { grid_max, coefficient_bound, bound: None, margin: None, refined: refine.is_some() };
    }
    let lip = n as f64 * coefficient_bound;
    let bounds = problem.bounds();
    let mut bound = f64::NEG_INFINITY;
    let mut margin = f64::NEG_INFINITY;
    let mut start = 0;
    for comp in grid.components() {
        let h = comp.spacing;
        for k in start..start + comp.intervals {
            let rho = bounds[k].min(bounds[k + 1]);
            let local = match refine {
                None => tent(values[k], values[k + 1], lip * h),
                Some(parts) => {
                    let (t0, t1) = (grid.points()[k], grid.points()[k + 1]);
                    let step = angle_step(t0, t1) / parts as f64;
                    let mut prev = values[k];
                    let mut best = f64::NEG_INFINITY;
                    for i in 1..=parts {
                        let next = if i == parts { values[k + 1] } else { evaluate(c, t0 + step * i as f64).norm() };
                        best = best.max(tent(prev, next, lip * step));
                        prev = next;
                    }
                    best
                }
            };
            bound = bound.max(local);
            margin = margin.max(local - rho);
        }
        start += comp.intervals + 1;
    }
    SupNormBound { grid_max, coefficient_bound, bound: Some(bound), margin: Some(margin), refined: refine.is_some() }
}

fn tent(a: f64, b: f64, lh: f64) -> f64 {
    // the Lipschitz tent never exceeds max(a, b) + lh/2; clamp for degenerate L = 0
    ((a + b + lh) / 2.0).max(a.max(b))
}

fn angle_step(t0: f64, t1: f64) -> f64 {
    let d = t1 - t0;
    if d < 0.0 {
        d + TAU
    } else {
        d
    }
}

/// `||g||_{L^∞(T)} <= M_N / (1 − nπ/N)` from `N` equispaced samples with
/// `nπ/N <= 1/8`.
fn circle_bound(c: &[Complex64], n: usize) -> f64 {
    let samples = (8.0 * PI * n as f64).ceil() as usize + 1;
    let max = (0..samples).map(|i| evaluate(c, TAU * i as f64 / samples as f64).norm()).fold(0.0, f64::max);
    max / (1.0 - n as f64 * PI / samples as f64)
}

/// Full certificate for coefficients `c` and multipliers `λ`.
pub fn certify(problem: &Problem, c: &[Complex64], lambda: &[f64], opts: &CertifyOptions) -> Certificate {
    let scale = problem.kkt_scale();
    let bounds = problem.bounds();
    let mut reasons = Vec::new();

    let shape_ok = c.len() == problem.dim() && lambda.len() == problem.num_constraints();
    if !shape_ok {
        reasons.push(format!(
            "expected {} coefficients and {} multipliers, got {} and {}",
            problem.dim(),
            problem.num_constraints(),
            c.len(),
            lambda.len()
        ));
        return Certificate {
            verdict: Verdict::Failed,
            stationarity_residual: f64::NAN,
            feasibility_margin: None,
            sup_norm: SupNormBound {
                grid_max: f64::NAN,
                coefficient_bound: f64::NAN,
                bound: None,
                margin: None,
                refined: false,
            },
            multiplier_sum: f64::NAN,
            multiplier_mass: f64::NAN,
            multiplier_bound_ok: false,
            max_grid_violation: f64::NAN,
            complementarity: f64::NAN,
            extremal_points: Vec::new(),
            cardinality_bound: 2 * problem.degree() + 2,
            suggested_grid: None,
            reasons,
        };
    }

    if let Some(k) = lambda.iter().position(|l| !(*l >= 0.0) || !l.is_finite()) {
        reasons.push(format!("multiplier {k} is negative or not finite"));
    }
    let stationarity_residual = check_stationarity(problem, c, lambda);
    if !(stationarity_residual <= opts.stationarity_tol) {
        reasons.push(format!("stationarity residual {stationarity_residual:e} exceeds {:e}", opts.stationarity_tol));
    }

    let values = problem.grid_values(c);
    let slack: Vec<f64> = values.iter().zip(bounds).map(|(g, r)| g.norm_sqr() - r * r).collect();
    let max_grid_violation = slack.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let complementarity = lambda.iter().zip(&slack).map(|(l, s)| l * s.abs()).fold(0.0, f64::max);
    let feas_tol = opts.kkt_tol * scale;
    if !(max_grid_violation <= feas_tol) {
        reasons.push(format!("grid constraint violated by {max_grid_violation:e}"));
    }
    if !(complementarity <= 10.0 * feas_tol) {
        reasons.push(format!("complementary slackness residual {complementarity:e}"));
    }

    let multiplier_sum: f64 = lambda.iter().sum();
    let multiplier_mass: f64 = lambda.iter().zip(bounds).map(|(l, r)| l * r * r).sum();
    let multiplier_bound_ok = check_multiplier_bound(lambda, bounds, problem.moments().norm_sq);
    if !multiplier_bound_ok {
        reasons.push(format!("multiplier mass {multiplier_mass:e} exceeds 2||f||²"));
    }

    let sup_norm = certify_sup_norm(problem, c, opts.refine);
    let feasibility_margin = sup_norm.margin;
    // |g|² <= ρ² + feas_tol on the grid corresponds to |g| − ρ <= feas_tol / 2ρ
    let rho_min = bounds.iter().copied().fold(f64::INFINITY, f64::min);
    let margin_tol = feas_tol / (2.0 * rho_min);
    let continuum_ok = feasibility_margin.is_some_and(|m| m <= margin_tol);

    let suggested_grid = match (feasibility_margin, sup_norm.bound) {
        (Some(margin), Some(bound)) if margin > margin_tol && sup_norm.grid_max < rho_min => {
            let excess = bound - sup_norm.grid_max;
            let room = rho_min - sup_norm.grid_max;
            Some(((problem.grid().m() as f64) * excess / room).ceil() as usize + 1)
        }
        _ => None,
    };

    let extremal_points = extract_extremal_points(problem, c, lambda, activity_tolerance(lambda));
    let verdict = if !reasons.is_empty() {
        Verdict::Failed
    } else if continuum_ok {
        Verdict::Certified
    } else {
        Verdict::GridFeasibleOnly
    };
    Certificate {
        verdict,
        stationarity_residual,
        feasibility_margin,
        sup_norm,
        multiplier_sum,
        multiplier_mass,
        multiplier_bound_ok,
        max_grid_violation,
        complementarity,
        extremal_points,
        cardinality_bound: 2 * problem.degree() + 2,
        suggested_grid,
        reasons,
    }
}
