//! Dense Hermitian Toeplitz assembly and Cholesky factorizations.
//!
//! Matrices are row-major `Vec`s. Only the lower triangle of a factor is
//! meaningful.

use num_complex::Complex64;
use thiserror::Error;

/// Relative pivot below which a factorization is reported as ill-conditioned.
pub const PIVOT_GUARD: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is numerically singular (relative pivot {relative:e} at row {row}); reduce the degree")]
    IllConditioned { row: usize, relative: f64 },
}

/// Hermitian Toeplitz matrix stored by its first row: `a[j][j + d] = row[d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianToeplitz {
    row: Vec<Complex64>,
}

impl HermitianToeplitz {
    pub fn new(row: Vec<Complex64>) -> Self {
        assert!(!row.is_empty(), "Toeplitz matrix needs at least one entry");
        Self { row }
    }

    pub fn dim(&self) -> usize {
        self.row.len()
    }

    pub fn first_row(&self) -> &[Complex64] {
        &self.row
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        if k >= j {
            self.row[k - j]
        } else {
            self.row[j - k].conj()
        }
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                out[j * n + k] = self.get(j, k);
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n).map(|j| (0..n).map(|k| self.get(j, k) * x[k]).sum()).collect()
    }

    /// `x* T x`, real for Hermitian `T`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        let tx = self.mul_vec(x);
        x.iter().zip(&tx).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Lower Cholesky factor `L` with `A = L L*`.
#[derive(Debug, Clone)]
pub struct HermitianCholesky {
    n: usize,
    l: Vec<Complex64>,
    min_relative_pivot: f64,
}

impl HermitianCholesky {
    /// Factor a dense Hermitian matrix (row-major, lower triangle read).
    /// Fails on a nonpositive pivot, or when a squared pivot falls below
    /// [`PIVOT_GUARD`] times the original diagonal entry.
    pub fn factor(mut a: Vec<Complex64>, n: usize) -> Result<Self, LinalgError> {
        assert_eq!(a.len(), n * n);
        let mut min_rel = f64::INFINITY;
        // row-oriented: row i only reads finished rows k < i
        for i in 0..n {
            let (done, rest) = a.split_at_mut(i * n);
            let ri = &mut rest[..n];
            for k in 0..i {
                let rk = &done[k * n..k * n + k + 1];
                let mut s = ri[k];
                for (x, y) in ri[..k].iter().zip(&rk[..k]) {
                    s -= x * y.conj();
                }
                ri[k] = s / rk[k].re;
            }
            let diag0 = ri[i].re;
            let d = diag0 - ri[..i].iter().map(|v| v.norm_sqr()).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: d });
            }
            let rel = d / diag0;
            min_rel = min_rel.min(rel);
            if rel < PIVOT_GUARD {
                return Err(LinalgError::IllConditioned { row: i, relative: rel });
            }
            ri[i] = Complex64::new(d.sqrt(), 0.0);
        }
        Ok(Self { n, l: a, min_relative_pivot: min_rel })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest ratio `pivot² / a_jj` seen during factorization.
    pub fn min_relative_pivot(&self) -> f64 {
        self.min_relative_pivot
    }

    /// Solve `L y = b` in place.
    pub fn forward_in_place(&self, y: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = y[i];
            for (lik, yk) in row.iter().zip(&y[..i]) {
                s -= lik * yk;
            }
            y[i] = s / self.l[i * n + i].re;
        }
    }

    /// Solve `L* x = y` in place.
    pub fn backward_in_place(&self, x: &mut [Complex64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i * n + i].re;
            x[i] = xi;
            // subtract column i of L* (= conj of row i of L) from earlier entries
            let row = &self.l[i * n..i * n + i];
            for (xk, lik) in x[..i].iter_mut().zip(row) {
                *xk -= lik.conj() * xi;
            }
        }
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }
}

/// Cholesky factor of a real symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SymmetricCholesky {
    n: usize,
    l: Vec<f64>,
}

impl SymmetricCholesky {
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, LinalgError> {
        assert_eq!(a.len(), n * n);
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: d });
            }
            let ljj = d.sqrt();
            a[j * n + j] = ljj;
            for i in (j + 1)..n {
                let (upper, lower) = a.split_at_mut(i * n);
                let rj = &upper[j * n..j * n + j];
                let ri = &mut lower[..n];
                let s: f64 = rj.iter().zip(&ri[..j]).map(|(x, y)| x * y).sum();
                ri[j] = (ri[j] - s) / ljj;
            }
        }
        Ok(Self { n, l: a })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i * n + i];
            x[i] = xi;
            for k in 0..i {
                x[k] -= self.l[i * n + k] * xi;
            }
        }
        x
    }
}
