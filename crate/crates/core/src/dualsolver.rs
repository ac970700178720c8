//! Lagrangian dual of the discretized bounded extremal problem.
//!
//! For multipliers `λ >= 0` on the constraint grid, the inner problem
//!
//! ```text
//! min_c  ||f - g||²_{L²(I)} + Σ_k λ_k (|g(x_k)|² - ρ_k²),   g = Σ_j c_j z^j
//! ```
//!
//! is an unconstrained Hermitian quadratic with minimizer `c = A(λ)⁻¹ b`,
//! `A(λ) = G + Σ_k λ_k v_k v_k*`, `v_k[j] = conj(x_k^j)`. Because both the
//! Gram matrix and the rank-one terms depend only on `j - l`, `A(λ)` is
//! Hermitian Toeplitz and is assembled in `O(M n)`.
//!
//! The dual function `D(λ) = ||f||² - Re(b* c) - Σ λ_k ρ_k²` is concave with
//!
//! ```text
//! ∂D/∂λ_k       = |g(x_k)|² - ρ_k²
//! ∂²D/∂λ_k∂λ_l  = -2 Re[ conj(g(x_k)) (v_k* A⁻¹ v_l) g(x_l) ]
//! ```
//!
//! and is maximized over `λ >= 0` by a projected Newton ascent. Each step
//! maximizes the local quadratic model over the feasible orthant, which
//! fixes the active set for the step; the model is exactly linear along
//! directions that leave `c` unchanged, so such steps run to the boundary.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arcgeom::ConstraintGrid;
use crate::linalg::{HermitianCholesky, LinalgError};
use crate::moments::{GramMatrix, MomentVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("problem data mismatch: {0}")]
    Shape(String),
    #[error("factorization of A(λ) failed: {0}")]
    Factorization(#[from] LinalgError),
    #[error("non-finite value encountered at iteration {iteration}")]
    NotFinite { iteration: usize },
    #[error("multipliers must be finite and nonnegative (index {index})")]
    NegativeMultiplier { index: usize },
}

/// A fully assembled instance: quadratic data, constraint grid and bounds.
#[derive(Debug, Clone)]
pub struct Problem {
    gram: GramMatrix,
    moments: MomentVector,
    grid: ConstraintGrid,
    bounds: Vec<f64>,
    /// Row-major `M x (n + 1)`: `eval[k][j] = x_k^j`.
    eval: Vec<Complex64>,
}

impl Problem {
    pub fn new(
        gram: GramMatrix,
        moments: MomentVector,
        grid: ConstraintGrid,
        bounds: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let dim = gram.dim();
        if moments.b.len() != dim {
            return Err(SolverError::Shape(format!(
                "moment vector has length {}, Gram matrix has dimension {dim}",
                moments.b.len()
            )));
        }
        if bounds.len() != grid.len() {
            return Err(SolverError::Shape(format!("{} bounds for {} grid points", bounds.len(), grid.len())));
        }
        let mut eval = Vec::with_capacity(grid.len() * dim);
        for &t in grid.points() {
            eval.extend((0..dim).map(|j| Complex64::cis(j as f64 * t)));
        }
        Ok(Self { gram, moments, grid, bounds, eval })
    }

    /// Same instance with a uniform bound on every grid point.
    pub fn with_uniform_bound(
        gram: GramMatrix,
        moments: MomentVector,
        grid: ConstraintGrid,
        rho: f64,
    ) -> Result<Self, SolverError> {
        let bounds = vec![rho; grid.len()];
        Self::new(gram, moments, grid, bounds)
    }

    pub fn degree(&self) -> usize {
        self.gram.degree()
    }

    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.grid.len()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn moments(&self) -> &MomentVector {
        &self.moments
    }

    pub fn grid(&self) -> &ConstraintGrid {
        &self.grid
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub(crate) fn eval_row(&self, k: usize) -> &[Complex64] {
        let d = self.dim();
        &self.eval[k * d..(k + 1) * d]
    }

    /// `g(x_k)` for every grid point.
    pub fn grid_values(&self, c: &[Complex64]) -> Vec<Complex64> {
        (0..self.num_constraints()).map(|k| self.eval_row(k).iter().zip(c).map(|(e, cj)| e * cj).sum()).collect()
    }

    /// `max(1, ||f||²)`, the scale of all KKT tolerances.
    pub fn kkt_scale(&self) -> f64 {
        self.moments.norm_sq.max(1.0)
    }

    /// `A(λ)` as its Toeplitz first row.
    fn system_row(&self, lambda: &[f64]) -> Vec<Complex64> {
        let mut row = self.gram.first_row().to_vec();
        for (k, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                for (r, e) in row.iter_mut().zip(self.eval_row(k)) {
                    *r += e * l;
                }
            }
        }
        row
    }

    fn validate_multipliers(&self, lambda: &[f64]) -> Result<(), SolverError> {
        if lambda.len() != self.num_constraints() {
            return Err(SolverError::Shape(format!(
                "{} multipliers for {} grid points",
                lambda.len(),
                self.num_constraints()
            )));
        }
        if let Some(index) = lambda.iter().position(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(SolverError::NegativeMultiplier { index });
        }
        Ok(())
    }

    /// `λ` spreading the measure of `J` evenly over the grid, which makes
    /// `A(λ)` close to the identity on well-resolved grids.
    fn spread_multipliers(&self) -> Vec<f64> {
        let mass = (1.0 - self.gram.first_row()[0].re).max(1.0 / TAU);
        vec![mass / self.num_constraints().max(1) as f64; self.num_constraints()]
    }
}

/// Inner minimizer and first-order dual information at one `λ`.
#[derive(Debug, Clone)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    /// `g(x_k)` on the grid.
    pub values: Vec<Complex64>,
    pub dual_value: f64,
    pub gradient: Vec<f64>,
    factor: HermitianCholesky,
}

impl DualState {
    pub fn active_set(&self) -> Vec<usize> {
        self.lambda.iter().enumerate().filter(|(_, &l)| l > 0.0).map(|(k, _)| k).collect()
    }

    /// `||A(λ) c - b||`, for verifying the inner solve.
    pub fn residual(&self, problem: &Problem) -> f64 {
        let row = problem.system_row(&self.lambda);
        let a = crate::linalg::HermitianToeplitz::new(row);
        let ac = a.mul_vec(&self.coefficients);
        ac.iter().zip(&problem.moments.b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Solve the inner problem at `λ` and evaluate the dual value and gradient.
pub fn inner_minimize(problem: &Problem, lambda: &[f64]) -> Result<DualState, SolverError> {
    problem.validate_multipliers(lambda)?;
    let n1 = problem.dim();
    let row = problem.system_row(lambda);
    let dense = crate::linalg::HermitianToeplitz::new(row).to_dense();
    let factor = HermitianCholesky::factor(dense, n1)?;
    let b = &problem.moments.b;
    let c = factor.solve(b);
    let values = problem.grid_values(&c);
    let bc: f64 = b.iter().zip(&c).map(|(bj, cj)| (bj.conj() * cj).re).sum();
    let penalty: f64 = lambda.iter().zip(&problem.bounds).map(|(l, r)| l * r * r).sum();
    let dual_value = problem.moments.norm_sq - bc - penalty;
    let gradient = values.iter().zip(&problem.bounds).map(|(g, r)| g.norm_sqr() - r * r).collect();
    Ok(DualState { lambda: lambda.to_vec(), coefficients: c, values, dual_value, gradient, factor })
}

/// Dual function value alone.
pub fn dual_value(problem: &Problem, lambda: &[f64]) -> Result<f64, SolverError> {
    inner_minimize(problem, lambda).map(|s| s.dual_value)
}

/// Dual Hessian restricted to `subset` (row-major `|subset|²`).
pub fn dual_hessian(problem: &Problem, state: &DualState, subset: &[usize]) -> Vec<f64> {
    let n1 = problem.dim();
    let f = subset.len();
    // y_k = L⁻¹ v_k, so that v_k* A⁻¹ v_l = y_k* y_l
    let mut ys = vec![Complex64::new(0.0, 0.0); f * n1];
    for (a, &k) in subset.iter().enumerate() {
        let y = &mut ys[a * n1..(a + 1) * n1];
        for (yj, e) in y.iter_mut().zip(problem.eval_row(k)) {
            *yj = e.conj();
        }
        state.factor.forward_in_place(y);
    }
    let mut h = vec![0.0; f * f];
    for a in 0..f {
        let ya = &ys[a * n1..(a + 1) * n1];
        let ga = state.values[subset[a]].conj();
        for b in a..f {
            let yb = &ys[b * n1..(b + 1) * n1];
            let mut re = 0.0;
            let mut im = 0.0;
            for (p, q) in ya.iter().zip(yb) {
                // conj(p) * q
                re += p.re * q.re + p.im * q.im;
                im += p.re * q.im - p.im * q.re;
            }
            let pab = Complex64::new(re, im);
            let v = -2.0 * (ga * pab * state.values[subset[b]]).re;
            h[a * f + b] = v;
            h[b * f + a] = v;
        }
    }
    h
}

/// `||f - g||²_{L²(I)} = ||f||² - 2 Re(b* c) + c* G c`.
pub fn primal_value(c: &[Complex64], gram: &GramMatrix, moments: &MomentVector) -> f64 {
    let bc: f64 = moments.b.iter().zip(c).map(|(bj, cj)| (bj.conj() * cj).re).sum();
    moments.norm_sq - 2.0 * bc + gram.quadratic_form(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative KKT tolerance; scaled by `max(1, ||f||²)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting multipliers; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, initial: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    InfeasibleInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub coefficients: Vec<Complex64>,
    pub multipliers: Vec<f64>,
    pub misfit: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    /// `max_k (|g(x_k)|² - ρ_k²)`, unscaled.
    pub max_violation: f64,
    /// `max_k λ_k |(|g(x_k)|² - ρ_k²)|`, unscaled.
    pub complementarity: f64,
    /// Set when `λ = 0` could not be factored and the solve started from
    /// multipliers spread over `J`.
    pub spread_start: bool,
    /// Dual value after every accepted step, starting value first.
    #[serde(skip)]
    pub dual_history: Vec<f64>,
}

impl SolveResult {
    pub fn multiplier_mass(&self, bounds: &[f64]) -> f64 {
        self.multipliers.iter().zip(bounds).map(|(l, r)| l * r * r).sum()
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 40;
/// Diagonal shift of the negated Hessian, relative to its largest entry.
const MODEL_SHIFT: f64 = 1e-10;
const RAY_HALVINGS: usize = 60;

fn kkt_measures(state: &DualState) -> (f64, f64) {
    let feas = state.gradient.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cs = state.lambda.iter().zip(&state.gradient).map(|(l, g)| l * g.abs()).fold(0.0, f64::max);
    (feas.max(0.0), cs)
}

fn finish(
    problem: &Problem,
    state: DualState,
    status: SolveStatus,
    iterations: usize,
    spread: bool,
    history: Vec<f64>,
) -> SolveResult {
    let misfit = primal_value(&state.coefficients, &problem.gram, &problem.moments);
    let (max_violation, complementarity) = kkt_measures(&state);
    SolveResult {
        status,
        misfit,
        dual_value: state.dual_value,
        duality_gap: misfit - state.dual_value,
        iterations,
        max_violation,
        complementarity,
        spread_start: spread,
        coefficients: state.coefficients,
        multipliers: state.lambda,
        dual_history: history,
    }
}

/// Maximize the dual over `λ >= 0`.
pub fn maximize_dual(problem: &Problem, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
    let m = problem.num_constraints();
    let input_ok = problem.bounds.iter().all(|r| *r > 0.0 && r.is_finite())
        && problem.moments.norm_sq.is_finite()
        && problem.moments.b.iter().all(|b| b.re.is_finite() && b.im.is_finite());
    if !input_ok {
        let n1 = problem.dim();
        return Ok(SolveResult {
            status: SolveStatus::InfeasibleInput,
            coefficients: vec![Complex64::new(0.0, 0.0); n1],
            multipliers: vec![0.0; m],
            misfit: problem.moments.norm_sq,
            dual_value: f64::NAN,
            duality_gap: f64::NAN,
            iterations: 0,
            max_violation: f64::NAN,
            complementarity: f64::NAN,
            spread_start: false,
            dual_history: Vec::new(),
        });
    }

    let mut spread = false;
    let mut state = match &opts.initial {
        Some(l0) => inner_minimize(problem, l0)?,
        None => match inner_minimize(problem, &vec![0.0; m]) {
            Ok(s) => s,
            Err(SolverError::Factorization(_)) if m > 0 => {
                spread = true;
                scaled_spread_start(problem)?
            }
            Err(e) => return Err(e),
        },
    };

    let tol = opts.tol * problem.kkt_scale();
    let mut history = vec![state.dual_value];

    for iter in 0..opts.max_iter {
        if !state.dual_value.is_finite() {
            return Err(SolverError::NotFinite { iteration: iter });
        }
        let (feas, cs) = kkt_measures(&state);
        if feas <= tol && cs <= tol {
            return Ok(finish(problem, state, SolveStatus::Converged, iter, spread, history));
        }

        let grad = &state.gradient;
        let mut accepted = None;
        if let Some(dir) = newton_direction(problem, &state) {
            accepted = line_search(problem, &state, &dir, 1.0)?;
        }

        if accepted.is_none() {
            // projected gradient fallback, step scaled by the Hessian diagonal
            let all: Vec<usize> = (0..m).collect();
            let diag_scale = hessian_diagonal(problem, &state, &all).into_iter().fold(0.0, f64::max);
            let step0 = if diag_scale > 0.0 { 1.0 / diag_scale } else { 1.0 };
            accepted = line_search(problem, &state, grad, step0)?;
        }

        match accepted {
            Some(next) => {
                state = next;
                history.push(state.dual_value);
            }
            None => {
                // no ascent possible at working precision
                let (feas, cs) = kkt_measures(&state);
                let status = if feas <= tol && cs <= tol { SolveStatus::Converged } else { SolveStatus::MaxIter };
                return Ok(finish(problem, state, status, iter, spread, history));
            }
        }
    }
    let (feas, cs) = kkt_measures(&state);
    let status = if feas <= tol && cs <= tol { SolveStatus::Converged } else { SolveStatus::MaxIter };
    Ok(finish(problem, state, status, opts.max_iter, spread, history))
}

/// Best point of `D` on the ray `t·λ_spread`, scanned over halvings of `t`.
fn scaled_spread_start(problem: &Problem) -> Result<DualState, SolverError> {
    let base = problem.spread_multipliers();
    let mut best = inner_minimize(problem, &base)?;
    let mut t = 1.0;
    for _ in 0..RAY_HALVINGS {
        t *= 0.5;
        let trial: Vec<f64> = base.iter().map(|l| l * t).collect();
        match inner_minimize(problem, &trial) {
            Ok(s) if s.dual_value > best.dual_value => best = s,
            Ok(_) | Err(SolverError::Factorization(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Maximizer of the regularized quadratic model of `D` over `λ + d >= 0`,
/// returned as the step `d`.
fn newton_direction(problem: &Problem, state: &DualState) -> Option<Vec<f64>> {
    let m = problem.num_constraints();
    let all: Vec<usize> = (0..m).collect();
    let mut q: Vec<f64> = dual_hessian(problem, state, &all).into_iter().map(|v| -v).collect();
    let max_diag = (0..m).map(|k| q[k * m + k]).fold(0.0, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    for k in 0..m {
        q[k * m + k] += MODEL_SHIFT * max_diag;
    }
    // in y = λ + d: min ½ yᵀQy - rᵀy with r = Qλ + ∇D
    let lambda = &state.lambda;
    let r: Vec<f64> = (0..m)
        .map(|k| q[k * m..(k + 1) * m].iter().zip(lambda).map(|(a, l)| a * l).sum::<f64>() + state.gradient[k])
        .collect();
    let y = nonneg_qp(&q, &r, lambda, m)?;
    let d: Vec<f64> = y.iter().zip(lambda).map(|(y, l)| y - l).collect();
    let ascent: f64 = d.iter().zip(&state.gradient).map(|(d, g)| d * g).sum();
    (ascent > 0.0).then_some(d)
}

/// Primal active-set method for `min ½ yᵀQy - rᵀy` over `y >= 0`, `Q`
/// positive definite, started from the feasible point `y0`.
fn nonneg_qp(q: &[f64], r: &[f64], y0: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut y = y0.to_vec();
    let mut chol = FreeCholesky::new(q, m, (0..m).filter(|&k| y[k] > 0.0).collect())?;
    let mut free: Vec<bool> = y.iter().map(|v| *v > 0.0).collect();
    let rscale = r.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    for _ in 0..(10 * m + 10) {
        let rf: Vec<f64> = chol.idx.iter().map(|&i| r[i]).collect();
        let z = chol.solve(&rf);
        if z.iter().all(|v| *v >= 0.0) {
            for (a, &i) in chol.idx.iter().enumerate() {
                y[i] = z[a];
            }
            // release the bound index whose objective decreases fastest
            let mut best = None;
            let mut best_w = 1e-13 * rscale;
            for k in (0..m).filter(|&k| !free[k]) {
                y[k] = 0.0;
                let row = &q[k * m..(k + 1) * m];
                let w = r[k] - chol.idx.iter().map(|&i| row[i] * y[i]).sum::<f64>();
                if w > best_w {
                    best_w = w;
                    best = Some(k);
                }
            }
            match best {
                Some(k) => {
                    if !chol.push(q, k) {
                        return None;
                    }
                    free[k] = true;
                }
                None => return Some(y),
            }
        } else {
            // move toward z until the first free variable reaches zero
            let mut alpha = 1.0;
            let mut hit = None;
            for (a, &i) in chol.idx.iter().enumerate() {
                if z[a] < 0.0 {
                    let t = y[i] / (y[i] - z[a]);
                    if t < alpha {
                        alpha = t;
                        hit = Some(i);
                    }
                }
            }
            let mut drop = Vec::new();
            for (a, &i) in chol.idx.iter().enumerate() {
                y[i] += alpha * (z[a] - y[i]);
                if y[i] <= 0.0 || Some(i) == hit {
                    y[i] = 0.0;
                    drop.push(i);
                }
            }
            for i in drop {
                free[i] = false;
                chol.remove(i);
            }
        }
    }
    None
}

/// Cholesky factor of the principal submatrix `Q[idx, idx]`, kept up to
/// date as indices enter and leave. Row `a` of `l` holds `a + 1` entries.
struct FreeCholesky {
    m: usize,
    idx: Vec<usize>,
    l: Vec<Vec<f64>>,
}

impl FreeCholesky {
    fn new(q: &[f64], m: usize, idx: Vec<usize>) -> Option<Self> {
        let mut c = Self { m, idx: Vec::with_capacity(idx.len()), l: Vec::with_capacity(idx.len()) };
        for k in idx {
            if !c.push(q, k) {
                return None;
            }
        }
        Some(c)
    }

    /// Append index `k` as the last row; false if the pivot is not positive.
    fn push(&mut self, q: &[f64], k: usize) -> bool {
        let row = &q[k * self.m..(k + 1) * self.m];
        let mut new = Vec::with_capacity(self.idx.len() + 1);
        for (a, la) in self.l.iter().enumerate() {
            let s: f64 = la[..a].iter().zip(&new).map(|(x, y)| x * y).sum();
            new.push((row[self.idx[a]] - s) / la[a]);
        }
        let d = row[k] - new.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        new.push(d.sqrt());
        self.l.push(new);
        self.idx.push(k);
        true
    }

    /// Drop index `k`, restoring triangular form with Givens rotations.
    fn remove(&mut self, k: usize) {
        let Some(p) = self.idx.iter().position(|&i| i == k) else { return };
        self.idx.remove(p);
        self.l.remove(p);
        for j in p..self.l.len() {
            let (a, b) = (self.l[j][j], self.l[j][j + 1]);
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for row in self.l[j..].iter_mut() {
                let (x, y) = (row[j], row[j + 1]);
                row[j] = c * x + s * y;
                row[j + 1] = -s * x + c * y;
            }
            self.l[j].truncate(j + 1);
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.len();
        let mut x = b.to_vec();
        for i in 0..n {
            let s: f64 = self.l[i][..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.l[i][i];
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i][i];
            x[i] = xi;
            for (xk, lik) in x[..i].iter_mut().zip(&self.l[i][..i]) {
                *xk -= lik * xi;
            }
        }
        x
    }
}

/// `-∂²D/∂λ_k²` on `subset`.
fn hessian_diagonal(problem: &Problem, state: &DualState, subset: &[usize]) -> Vec<f64> {
    let n1 = problem.dim();
    let mut y = vec![Complex64::new(0.0, 0.0); n1];
    subset
        .iter()
        .map(|&k| {
            for (yj, e) in y.iter_mut().zip(problem.eval_row(k)) {
                *yj = e.conj();
            }
            state.factor.forward_in_place(&mut y);
            let pkk: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            2.0 * state.values[k].norm_sqr() * pkk
        })
        .collect()
}

/// `||λ - max(0, λ + ∇D)||_∞`, zero exactly at a KKT point.
fn projected_gradient_norm(state: &DualState) -> f64 {
    state.lambda.iter().zip(&state.gradient).map(|(l, g)| (l - (l + g).max(0.0)).abs()).fold(0.0, f64::max)
}

/// Projected backtracking search along `λ + α·step·dir`, clipped at zero.
///
/// A trial is accepted when the dual value does not decrease and meets the
/// Armijo condition along the projected path. When the predicted gain is
/// below the rounding level of the dual value, a trial is accepted instead
/// if it reduces the projected gradient without a measurable loss.
fn line_search(problem: &Problem, state: &DualState, dir: &[f64], step: f64) -> Result<Option<DualState>, SolverError> {
    let noise = 64.0 * f64::EPSILON * problem.kkt_scale().max(state.dual_value.abs());
    let pg = projected_gradient_norm(state);
    let mut alpha = 1.0;
    for _ in 0..MAX_BACKTRACK {
        let trial: Vec<f64> = state.lambda.iter().zip(dir).map(|(l, d)| (l + alpha * step * d).max(0.0)).collect();
        if trial == state.lambda {
            return Ok(None);
        }
        let predicted: f64 = trial.iter().zip(&state.lambda).zip(&state.gradient).map(|((t, l), g)| g * (t - l)).sum();
        if predicted > 0.0 {
            match inner_minimize(problem, &trial) {
                Ok(next) if next.dual_value.is_finite() => {
                    let gain = next.dual_value - state.dual_value;
                    if predicted > noise {
                        if gain >= 0.0 && gain >= ARMIJO * predicted {
                            return Ok(Some(next));
                        }
                    } else if gain >= -noise && projected_gradient_norm(&next) < pg {
                        return Ok(Some(next));
                    }
                }
                Ok(_) | Err(SolverError::Factorization(_)) => {}
                Err(e) => return Err(e),
            }
        }
        alpha *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcgeom::{build_constraint_grid, ArcSystem};
    use crate::moments::gram_closed_form;
    use std::f64::consts::PI;

    fn half_circle_constant(value: f64, points: &[f64]) -> Problem {
        let arcs = ArcSystem::new(&[(0.0, PI)]).unwrap();
        let gram = gram_closed_form(&arcs, 0);
        // f ≡ value on (0, π): b = value/2, ||f||² = value²/2
        let moments = MomentVector { b: vec![Complex64::new(value / 2.0, 0.0)], norm_sq: value * value / 2.0 };
        Problem::with_uniform_bound(gram, moments, ConstraintGrid::from_points(points), 1.0).unwrap()
    }

    #[test]
    fn one_variable_oracle() {
        let p = half_circle_constant(2.0, &[1.5 * PI]);
        // D(λ) = 2 - 1/(1/2 + λ) - λ
        for lam in [0.0, 0.25, 0.5, 1.3] {
            let s = inner_minimize(&p, &[lam]).unwrap();
            assert!((s.coefficients[0].re - 1.0 / (0.5 + lam)).abs() < 1e-14);
            assert!((s.dual_value - (2.0 - 1.0 / (0.5 + lam) - lam)).abs() < 1e-14);
        }
        let r = maximize_dual(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.coefficients[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!((r.multipliers[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn multipliers_split_but_total_is_determined() {
        let p = half_circle_constant(2.0, &[1.2 * PI, 1.5 * PI, 1.8 * PI]);
        let r = maximize_dual(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.coefficients[0].re - 1.0).abs() < 1e-8);
        let total: f64 = r.multipliers.iter().sum();
        assert!((total - 0.5).abs() < 1e-7, "total {total}");
    }

    #[test]
    fn zero_data() {
        let arcs = ArcSystem::new(&[(0.0, 2.0)]).unwrap();
        let grid = build_constraint_grid(&arcs, 8).unwrap();
        let gram = gram_closed_form(&arcs, 3);
        let moments = MomentVector { b: vec![Complex64::new(0.0, 0.0); 4], norm_sq: 0.0 };
        let p = Problem::with_uniform_bound(gram, moments, grid, 0.7).unwrap();
        let lam: Vec<f64> = (0..9).map(|k| 0.1 * k as f64).collect();
        let s = inner_minimize(&p, &lam).unwrap();
        assert!(s.coefficients.iter().all(|c| c.norm() == 0.0));
        let expected: f64 = -lam.iter().map(|l| l * 0.49).sum::<f64>();
        assert!((s.dual_value - expected).abs() < 1e-14);
        assert!(s.gradient.iter().all(|g| (g + 0.49).abs() < 1e-15));
    }

    #[test]
    fn rejects_negative_multipliers() {
        let p = half_circle_constant(2.0, &[1.5 * PI]);
        assert_eq!(inner_minimize(&p, &[-0.1]).unwrap_err(), SolverError::NegativeMultiplier { index: 0 });
        assert!(matches!(inner_minimize(&p, &[0.1, 0.2]), Err(SolverError::Shape(_))));
    }

    #[test]
    fn nonpositive_bound_is_infeasible_input() {
        let arcs = ArcSystem::new(&[(0.0, PI)]).unwrap();
        let gram = gram_closed_form(&arcs, 0);
        let moments = MomentVector { b: vec![Complex64::new(1.0, 0.0)], norm_sq: 2.0 };
        let p = Problem::with_uniform_bound(gram, moments, ConstraintGrid::from_points(&[4.0]), 0.0).unwrap();
        let r = maximize_dual(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleInput);
    }

    #[test]
    fn primal_value_identities() {
        let arcs = ArcSystem::new(&[(0.4, 3.9)]).unwrap();
        let gram = gram_closed_form(&arcs, 2);
        let moments = MomentVector {
            b: vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4), Complex64::new(0.05, 0.0)],
            norm_sq: 3.0,
        };
        let zero = vec![Complex64::new(0.0, 0.0); 3];
        assert_eq!(primal_value(&zero, &gram, &moments), 3.0);
        let c = gram.factor().unwrap().solve(&moments.b);
        let bc: f64 = moments.b.iter().zip(&c).map(|(b, x)| (b.conj() * x).re).sum();
        let v = primal_value(&c, &gram, &moments);
        assert!((v - (3.0 - bc)).abs() < 1e-13);
        let other = vec![c[0] + 0.01, c[1] - Complex64::new(0.0, 0.02), c[2]];
        assert!(primal_value(&other, &gram, &moments) >= v);
    }
}
