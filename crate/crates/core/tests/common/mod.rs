#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use arcfit::arcgeom::ArcSystem;
use arcfit::certifier::CertifyOptions;
use arcfit::dualsolver::SolveOptions;
use arcfit::ingest::{generate_synthetic, SyntheticCase};
use arcfit::instance::Instance;
use arcfit::moments::GramMode;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn instance(arcs_pi: &[(f64, f64)], case: &SyntheticCase, density: usize, bound: f64) -> Instance {
    let arcs = ArcSystem::from_pi_units(arcs_pi).unwrap();
    let data = generate_synthetic(case, &arcs, density);
    Instance {
        arcs,
        data,
        bounds: vec![bound],
        gram_mode: GramMode::Quadrature,
        solve: SolveOptions::default(),
        certify: CertifyOptions::default(),
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Random arcs of `I` in units of π: one or two components.
pub fn random_arcs(rng: &mut StdRng) -> Vec<(f64, f64)> {
    let a = rng.gen_range(0.0..2.0);
    if rng.gen_bool(0.5) {
        let len = rng.gen_range(0.4..1.4);
        vec![(a, a + len)]
    } else {
        let l1 = rng.gen_range(0.2..0.7);
        let gap = rng.gen_range(0.15..0.4);
        let l2 = rng.gen_range(0.2..0.6);
        vec![(a, a + l1), (a + l1 + gap, a + l1 + gap + l2)]
    }
}

pub fn random_case(rng: &mut StdRng, n: usize) -> SyntheticCase {
    match rng.gen_range(0..3) {
        0 => SyntheticCase::Constant { value: [rng.gen_range(0.5..2.5), rng.gen_range(-1.0..1.0)] },
        1 => {
            let deg = n + rng.gen_range(1..6);
            let coefficients = (0..=deg).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            SyntheticCase::PolynomialTrace { coefficients }
        }
        _ => SyntheticCase::Filterlike { order: rng.gen_range(2..7), pole_offset: rng.gen_range(0.1..0.3), level: 1.0 },
    }
}

/// Random instance with `n <= max_n` and `m <= max_m`.
pub fn random_instance(rng: &mut StdRng, max_n: usize, max_m: usize) -> (Instance, usize, usize) {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(n.max(8).min(max_m)..=max_m);
    let arcs = random_arcs(rng);
    let case = random_case(rng, n);
    let bound = rng.gen_range(0.3..1.2);
    (instance(&arcs, &case, 300, bound), n, m)
}

/// Brute-force solution of the discrete primal problem
///
/// ```text
/// min Σ_s w_s |f_s - g(θ_s)|²   subject to |g(x_k)| <= ρ
/// ```
///
/// by a coarse search over coefficient space followed by projected
/// gradient, with projections onto the feasible set by Dykstra's method.
pub struct PrimalOracle {
    d: usize,
    gram: Vec<Complex64>,
    b: Vec<Complex64>,
    /// Rows `(e^{i j x_k})_j`.
    rows: Vec<Vec<Complex64>>,
    rho: f64,
}

impl PrimalOracle {
    /// `thetas`, `values`: uniform samples on one arc, endpoints included.
    pub fn new(thetas: &[f64], values: &[Complex64], grid: &[f64], rho: f64, n: usize) -> Self {
        let d = n + 1;
        let h = (thetas[1] - thetas[0]).rem_euclid(TAU);
        let w: Vec<f64> =
            (0..thetas.len()).map(|s| if s == 0 || s + 1 == thetas.len() { 0.5 * h } else { h } / TAU).collect();
        let mut gram = vec![Complex64::new(0.0, 0.0); d * d];
        let mut b = vec![Complex64::new(0.0, 0.0); d];
        for (s, (&t, &f)) in thetas.iter().zip(values).enumerate() {
            for j in 0..d {
                let ej = Complex64::cis(j as f64 * t);
                b[j] += w[s] * f * ej.conj();
                for k in 0..d {
                    gram[j * d + k] += w[s] * Complex64::cis(k as f64 * t) * ej.conj();
                }
            }
        }
        let rows = grid.iter().map(|&x| (0..d).map(|j| Complex64::cis(j as f64 * x)).collect()).collect();
        Self { d, gram, b, rows, rho }
    }

    /// Objective up to the constant `Σ w |f|²`.
    fn objective(&self, c: &[Complex64]) -> f64 {
        let mut v = 0.0;
        for j in 0..self.d {
            let gc: Complex64 = (0..self.d).map(|k| self.gram[j * self.d + k] * c[k]).sum();
            v += (c[j].conj() * gc).re - 2.0 * (self.b[j].conj() * c[j]).re;
        }
        v
    }

    fn gradient(&self, c: &[Complex64]) -> Vec<Complex64> {
        (0..self.d)
            .map(|j| 2.0 * ((0..self.d).map(|k| self.gram[j * self.d + k] * c[k]).sum::<Complex64>() - self.b[j]))
            .collect()
    }

    fn feasible(&self, c: &[Complex64], slack: f64) -> bool {
        self.rows.iter().all(|r| r.iter().zip(c).map(|(a, x)| a * x).sum::<Complex64>().norm() <= self.rho + slack)
    }

    fn project_one(&self, k: usize, c: &mut [Complex64]) {
        let r = &self.rows[k];
        let s: Complex64 = r.iter().zip(c.iter()).map(|(a, x)| a * x).sum();
        let abs = s.norm();
        if abs > self.rho {
            let excess = s - s * (self.rho / abs);
            for (x, a) in c.iter_mut().zip(r) {
                *x -= excess * a.conj() / self.d as f64;
            }
        }
    }

    /// Euclidean projection onto the feasible set.
    fn project(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut x = c.to_vec();
        let mut incr = vec![vec![Complex64::new(0.0, 0.0); self.d]; self.rows.len()];
        for _ in 0..20_000 {
            let before = x.clone();
            for k in 0..self.rows.len() {
                let mut y: Vec<Complex64> = x.iter().zip(&incr[k]).map(|(a, p)| a + p).collect();
                let pre = y.clone();
                self.project_one(k, &mut y);
                for j in 0..self.d {
                    incr[k][j] = pre[j] - y[j];
                }
                x = y;
            }
            if dist(&x, &before) < 1e-15 {
                break;
            }
        }
        x
    }

    fn grid_search(&self, radius: f64, per_dim: usize) -> Vec<Complex64> {
        let dims = 2 * self.d;
        let axis: Vec<f64> = (0..per_dim).map(|i| -radius + 2.0 * radius * i as f64 / (per_dim - 1) as f64).collect();
        let mut best = vec![Complex64::new(0.0, 0.0); self.d];
        let mut best_val = self.objective(&best);
        let mut idx = vec![0usize; dims];
        let mut c = vec![Complex64::new(0.0, 0.0); self.d];
        loop {
            for j in 0..self.d {
                c[j] = Complex64::new(axis[idx[2 * j]], axis[idx[2 * j + 1]]);
            }
            if self.feasible(&c, 0.0) {
                let v = self.objective(&c);
                if v < best_val {
                    best_val = v;
                    best.clone_from(&c);
                }
            }
            let mut p = 0;
            loop {
                if p == dims {
                    return best;
                }
                idx[p] += 1;
                if idx[p] < per_dim {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
        }
    }

    pub fn solve(&self) -> Vec<Complex64> {
        let per_dim = match self.d {
            1 => 201,
            2 => 25,
            _ => 9,
        };
        let mut c = self.grid_search(2.5, per_dim);
        // Lipschitz constant of the gradient, by Gershgorin
        let lip = 2.0
            * (0..self.d)
                .map(|j| (0..self.d).map(|k| self.gram[j * self.d + k].norm()).sum::<f64>())
                .fold(0.0, f64::max);
        let step = 1.0 / lip;
        for _ in 0..50_000 {
            let g = self.gradient(&c);
            let trial: Vec<Complex64> = c.iter().zip(&g).map(|(x, gx)| x - step * gx).collect();
            let next = self.project(&trial);
            let moved = dist(&next, &c);
            c = next;
            if moved < 1e-13 {
                break;
            }
        }
        c
    }
}

/// Uniform grid of `m + 1` points on `[a, b]` (radians), endpoints included.
pub fn uniform_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect()
}

/// `(1/2π) ∫_I e^{idθ} dθ` by composite Simpson with `nodes` points in total.
pub fn simpson_moment(arcs_pi: &[(f64, f64)], d: i64, nodes: usize) -> Complex64 {
    let total: f64 = arcs_pi.iter().map(|(a, b)| b - a).sum();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(a, b) in arcs_pi {
        let mut k = ((nodes as f64 * (b - a) / total) as usize).max(2);
        k += k % 2;
        let (lo, hi) = (a * PI, b * PI);
        let h = (hi - lo) / k as f64;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..=k {
            let w = if i == 0 || i == k {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * Complex64::cis(d as f64 * (lo + h * i as f64));
        }
        acc += s * h / 3.0;
    }
    acc / TAU
}

pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_arcfit")
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Largest relative error of the dual gradient and Hessian against central
/// differences, at random strictly positive `λ` on a random instance.
pub fn derivative_errors(seed: u64) -> (f64, f64) {
    use arcfit::dualsolver::{dual_hessian, inner_minimize};
    let mut r = rng(seed);
    let (inst, n, m) = random_instance(&mut r, 15, 40);
    let problem = inst.problem(n, m).unwrap();
    let count = problem.num_constraints();
    let lambda: Vec<f64> = (0..count).map(|_| r.gen_range(0.2..1.0) / count as f64).collect();
    let state = inner_minimize(&problem, &lambda).unwrap();
    let all: Vec<usize> = (0..count).collect();
    let hess = dual_hessian(&problem, &state, &all);

    let shifted = |k: usize, h: f64| {
        let mut l = lambda.clone();
        l[k] += h;
        inner_minimize(&problem, &l).unwrap()
    };
    let hg = 1e-6;
    let hh = 1e-5;
    let mut g_err = 0.0f64;
    let mut g_norm = 0.0f64;
    let mut h_err = 0.0f64;
    let mut h_norm = 0.0f64;
    for k in 0..count {
        let (up, down) = (shifted(k, hg), shifted(k, -hg));
        let fd = (up.dual_value - down.dual_value) / (2.0 * hg);
        g_err += (fd - state.gradient[k]).powi(2);
        g_norm += state.gradient[k].powi(2);
        let (up, down) = (shifted(k, hh), shifted(k, -hh));
        for l in 0..count {
            let fd = (up.gradient[l] - down.gradient[l]) / (2.0 * hh);
            h_err += (fd - hess[l * count + k]).powi(2);
            h_norm += hess[l * count + k].powi(2);
        }
    }
    ((g_err / g_norm).sqrt(), (h_err / h_norm).sqrt())
}
