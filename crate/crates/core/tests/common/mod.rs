//! Independent reference implementations used as test oracles. None of these
//! call into the solver code paths they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use mmv_core::synth::GaussianStream;

pub fn gaussian(rng: &mut GaussianStream, rows: usize, cols: usize) -> DMatrix<f64> {
    rng.normal_matrix(rows, cols)
}

/// Rows of `m` orthonormalized by classical Gram–Schmidt (twice).
pub fn gram_schmidt_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for _ in 0..2 {
        for i in 0..out.nrows() {
            for j in 0..i {
                let proj = out.row(i).dot(&out.row(j));
                let rj = out.row(j).into_owned();
                let mut ri = out.row_mut(i);
                ri -= rj * proj;
            }
            let n = out.row(i).norm();
            out.row_mut(i).scale_mut(1.0 / n);
        }
    }
    out
}

/// Projection onto `{α : ‖Φα − B‖_F ≤ ε}` by bisection on the Lagrange
/// multiplier, solving `(I + λΦᵀΦ)α = q + λΦᵀB` directly at every probe.
pub fn bisection_projection(phi: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64, q: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(eps > 0.0);
    let big_n = phi.ncols();
    let gram = phi.transpose() * phi;
    let rhs_b = phi.transpose() * b;
    let solve = |lambda: f64| -> DMatrix<f64> {
        let m = DMatrix::<f64>::identity(big_n, big_n) + &gram * lambda;
        let rhs = q + &rhs_b * lambda;
        m.lu().solve(&rhs).expect("nonsingular")
    };
    let residual = |alpha: &DMatrix<f64>| (phi * alpha - b).norm();
    if residual(q) <= eps {
        return q.clone();
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while residual(&solve(hi)) > eps {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if residual(&solve(mid)) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(0.5 * (lo + hi))
}

/// Affine projection onto `{α : Φα = B}` for full-row-rank `Φ` using an
/// explicit inverse of `ΦΦᵀ`.
pub fn affine_projection(phi: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let inv = (phi * phi.transpose()).try_inverse().expect("full row rank");
    q - phi.transpose() * (inv * (phi * q - b))
}

/// Row-wise Huber gradient written out element by element.
pub fn huber_row_gradient(alpha: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(alpha.nrows(), alpha.ncols());
    for i in 0..alpha.nrows() {
        let mut sq = 0.0;
        for j in 0..alpha.ncols() {
            sq += alpha[(i, j)] * alpha[(i, j)];
        }
        let norm = sq.sqrt();
        for j in 0..alpha.ncols() {
            g[(i, j)] = if norm < mu { alpha[(i, j)] / mu } else { alpha[(i, j)] / norm };
        }
    }
    g
}

/// Literal transcription of the smoothed iteration at fixed μ with `ε = 0`:
/// every step re-forms the weighted gradient sum from the stored history.
/// Returns `(α_k, y_k, z_k)` for `k = 0..steps`.
pub fn literal_iterations(
    phi: &DMatrix<f64>,
    b: &DMatrix<f64>,
    alpha0: &DMatrix<f64>,
    mu: f64,
    steps: usize,
) -> Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let lipschitz = 1.0 / mu;
    let sigma_p = 1.0;
    let mut alpha = alpha0.clone();
    let mut history: Vec<DMatrix<f64>> = Vec::new();
    let mut out = Vec::new();
    for k in 0..steps {
        let grad = huber_row_gradient(&alpha, mu);
        // Minimizer of (L/2)‖a − α_k‖² + ⟨∇f, a − α_k⟩ over Q.
        let y = affine_projection(phi, b, &(&alpha - &grad / lipschitz));
        // Minimizer of (L/σ_p)·½‖a − α₀‖² + Σ a_i ⟨∇f_i, a − α_i⟩.
        history.push(grad);
        let mut weighted = DMatrix::zeros(alpha.nrows(), alpha.ncols());
        for (i, g) in history.iter().enumerate() {
            weighted += g * ((i as f64 + 1.0) / 2.0);
        }
        let z = affine_projection(phi, b, &(alpha0 - weighted * (sigma_p / lipschitz)));
        let tau = 2.0 / (k as f64 + 3.0);
        alpha = &z * tau + &y * (1.0 - tau);
        out.push((alpha.clone(), y, z));
    }
    out
}

/// Least-squares fit of `B` on the columns in `support`; returns the full
/// `N × L` coefficient matrix and the residual norm.
pub fn restricted_least_squares(phi: &DMatrix<f64>, b: &DMatrix<f64>, support: &[usize]) -> (DMatrix<f64>, f64) {
    let sub = DMatrix::from_fn(phi.nrows(), support.len(), |i, j| phi[(i, support[j])]);
    let coef = sub.clone().svd(true, true).solve(b, 1e-14).expect("svd solve");
    let mut full = DMatrix::zeros(phi.ncols(), b.ncols());
    for (j, &s) in support.iter().enumerate() {
        full.set_row(s, &coef.row(j));
    }
    let res = (&sub * &coef - b).norm();
    (full, res)
}

/// All `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Support minimizing the least-squares residual over all `k`-subsets.
pub fn best_support(phi: &DMatrix<f64>, b: &DMatrix<f64>, k: usize) -> Vec<usize> {
    subsets(phi.ncols(), k)
        .into_iter()
        .map(|s| {
            let r = restricted_least_squares(phi, b, &s).1;
            (s, r)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

/// Single-vector smoothed solver with continuation for a row-orthonormal
/// `Φ` and `ε = 0`, written against plain vectors.
pub struct SmvSettings {
    pub stages: usize,
    pub max_iters: usize,
    pub window: usize,
    pub tol: f64,
}

pub fn smv_nesta(phi: &DMatrix<f64>, b: &DVector<f64>, s: &SmvSettings) -> DVector<f64> {
    let project = |q: &DVector<f64>| -> DVector<f64> { q - phi.transpose() * (phi * q - b) };
    let huber = |t: f64, mu: f64| if t >= mu { t - mu / 2.0 } else { t * t / (2.0 * mu) };
    let objective = |x: &DVector<f64>, mu: f64| x.iter().map(|v| huber(v.abs(), mu)).sum::<f64>();
    let gradient = |x: &DVector<f64>, mu: f64| x.map(|v| if v.abs() < mu { v / mu } else { v.signum() });

    let corr = phi.transpose() * b;
    let top = corr.amax();
    let mu0 = 0.9 * top;
    let mu_f = 1e-4 * top;
    let ratio = (mu_f / mu0).powf(1.0 / s.stages as f64);
    let mut x = project(&DVector::zeros(phi.ncols()));
    for t in 1..=s.stages {
        let mu = if t == s.stages { mu_f } else { mu0 * ratio.powi(t as i32) };
        let x0 = x.clone();
        let mut xk = x.clone();
        let mut y = x.clone();
        let mut acc = DVector::zeros(phi.ncols());
        let mut trace: Vec<f64> = Vec::new();
        for k in 0..s.max_iters {
            let g = gradient(&xk, mu);
            y = project(&(&xk - &g * mu));
            acc += &g * ((k as f64 + 1.0) / 2.0);
            let z = project(&(&x0 - &acc * mu));
            let tau = 2.0 / (k as f64 + 3.0);
            xk = &z * tau + &y * (1.0 - tau);
            trace.push(objective(&y, mu));
            if trace.len() > s.window {
                let last = trace[trace.len() - 1];
                let prev = &trace[trace.len() - 1 - s.window..trace.len() - 1];
                let mean = prev.iter().sum::<f64>() / s.window as f64;
                if (last - mean).abs() / mean.max(top) < s.tol {
                    break;
                }
            }
        }
        x = y;
    }
    x
}
