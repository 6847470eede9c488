//! Euclidean projection onto the data-consistency set
//! `Q = {α : ‖Φ·α − B‖_F ≤ ε}`.
//!
//! For an infeasible point `q` with residual `r = Φq − B`, the projection is
//! `α(λ) = q − λ·Φᵀ·(I + λ·ΦΦᵀ)⁻¹·r`, whose residual is `(I + λ·ΦΦᵀ)⁻¹·r`.
//! The multiplier `λ > 0` solves `‖(I + λ·ΦΦᵀ)⁻¹·r‖_F = ε`. When
//! `ΦΦᵀ = c·I` this has a closed form; otherwise the eigendecomposition of
//! `ΦΦᵀ` is computed once and the secular equation is solved by safeguarded
//! Newton iteration on `1/‖res(λ)‖ − 1/ε`, which is concave and increasing.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{MmvError, Result};
use crate::problem::MmvProblem;

/// Eigenvalues of `ΦΦᵀ` at or below this fraction of the largest are treated
/// as zero.
const NULL_EIGEN_TOL: f64 = 1e-12;

/// Absolute slack (scaled by `max(1, ‖B‖_F)`) when deciding that an `ε = 0`
/// system is inconsistent.
const CONSISTENCY_TOL: f64 = 1e-9;

const MAX_SECULAR_ITERS: usize = 200;

#[derive(Debug, Clone)]
enum Kind {
    /// `ΦΦᵀ = c·I`.
    Scaled { c: f64 },
    /// `ΦΦᵀ = U·diag(s)·Uᵀ`.
    Spectral { u: DMatrix<f64>, s: DVector<f64>, null: Vec<bool> },
}

/// Projector onto the feasible set of one problem. Precomputes whatever the
/// operator structure requires and can be reused for every iteration.
#[derive(Debug, Clone)]
pub struct FeasibleSet<'a> {
    problem: &'a MmvProblem,
    kind: Kind,
}

impl<'a> FeasibleSet<'a> {
    pub fn new(problem: &'a MmvProblem) -> Result<Self> {
        let phi = problem.phi();
        let kind = match phi.row_scale() {
            Some(c) => Kind::Scaled { c },
            None => {
                let gram = phi.entries() * phi.entries().transpose();
                let eig = SymmetricEigen::new(gram);
                let s = eig.eigenvalues.map(|v| v.max(0.0));
                let s_max = s.max();
                if s_max <= 0.0 {
                    return Err(MmvError::Degenerate("operator is identically zero".into()));
                }
                let null = s.iter().map(|&v| v <= NULL_EIGEN_TOL * s_max).collect();
                Kind::Spectral { u: eig.eigenvectors, s, null }
            }
        };
        Ok(Self { problem, kind })
    }

    pub fn problem(&self) -> &MmvProblem {
        self.problem
    }

    /// Whether the closed-form (row-orthogonal) projection is used.
    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, Kind::Scaled { .. })
    }

    pub fn residual(&self, alpha: &DMatrix<f64>) -> DMatrix<f64> {
        self.problem.phi().entries() * alpha - self.problem.b()
    }

    pub fn contains(&self, alpha: &DMatrix<f64>, tol: f64) -> bool {
        self.residual(alpha).norm() <= self.problem.epsilon() + tol
    }

    /// Closest point of the feasible set to `q` in Frobenius distance.
    /// Feasible inputs are returned unchanged.
    pub fn project(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let r = self.residual(q);
        let rn = r.norm();
        let eps = self.problem.epsilon();
        if rn <= eps {
            return Ok(q.clone());
        }
        let phi = self.problem.phi().entries();
        match &self.kind {
            Kind::Scaled { c } => {
                let factor = (1.0 - eps / rn) / c;
                Ok(q - phi.tr_mul(&r) * factor)
            }
            Kind::Spectral { u, s, null } => {
                let rhat = u.tr_mul(&r);
                let weights: Vec<f64> = rhat.row_iter().map(|row| row.norm_squared()).collect();
                let null_sq: f64 = weights.iter().zip(null).filter(|(_, &z)| z).map(|(w, _)| w).sum();
                let null_norm = null_sq.sqrt();
                let slack = CONSISTENCY_TOL * self.problem.b().norm().max(1.0);
                if null_norm > eps + slack {
                    return Err(MmvError::Infeasible(format!(
                        "data has a component of norm {null_norm:e} outside the range of the operator (epsilon {eps:e})"
                    )));
                }
                // Scale applied to each eigen-row of r̂ before mapping back.
                let scales: Vec<f64> = if eps == 0.0 || null_norm >= eps {
                    // λ → ∞: pseudo-inverse step onto the affine set.
                    s.iter().zip(null).map(|(&si, &z)| if z { 0.0 } else { 1.0 / si }).collect()
                } else {
                    let lambda = solve_secular(&weights, s.as_slice(), null, eps, rn, null_sq);
                    s.iter()
                        .zip(null)
                        .map(|(&si, &z)| if z { 0.0 } else { lambda / (1.0 + lambda * si) })
                        .collect()
                };
                let mut w = rhat;
                for (i, sc) in scales.into_iter().enumerate() {
                    w.row_mut(i).scale_mut(sc);
                }
                Ok(q - phi.tr_mul(&(u * w)))
            }
        }
    }
}

/// Projects `q` onto the feasible set of `problem`.
pub fn project_feasible(q: &DMatrix<f64>, problem: &MmvProblem) -> Result<DMatrix<f64>> {
    FeasibleSet::new(problem)?.project(q)
}

/// Root of `Σ w_i/(1+λ s_i)² = ε²` over `λ > 0`, given that the value at
/// `λ = 0` is `rn² > ε²` and the null-space part `null_sq < ε²`.
fn solve_secular(weights: &[f64], s: &[f64], null: &[bool], eps: f64, rn: f64, null_sq: f64) -> f64 {
    let eval = |lambda: f64| -> (f64, f64) {
        let mut g = null_sq;
        let mut dg = 0.0;
        for ((&w, &si), &z) in weights.iter().zip(s).zip(null) {
            if z {
                continue;
            }
            let d = 1.0 + lambda * si;
            g += w / (d * d);
            dg += w * si / (d * d * d);
        }
        let inv = 1.0 / g.sqrt();
        // phi(λ) = 1/√g − 1/ε and its derivative.
        (inv - 1.0 / eps, dg * inv * inv * inv)
    };
    let s_min = s
        .iter()
        .zip(null)
        .filter(|(_, &z)| !z)
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0_f64;
    let mut hi = (((rn * rn - null_sq) / (eps * eps - null_sq)).sqrt() - 1.0) / s_min;
    let mut lambda = 0.0;
    for _ in 0..MAX_SECULAR_ITERS {
        let (phi, dphi) = eval(lambda);
        if phi.abs() * eps <= 1e-15 {
            break;
        }
        if phi < 0.0 {
            lo = lo.max(lambda);
        } else {
            hi = hi.min(lambda);
        }
        let mut next = lambda - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::MeasurementMatrix;

    fn problem(a: &[f64], rows: usize, cols: usize, b: &[f64], eps: f64) -> MmvProblem {
        let a = MeasurementMatrix::new(DMatrix::from_row_slice(rows, cols, a)).unwrap();
        let l = b.len() / rows;
        MmvProblem::new(a, DMatrix::from_row_slice(rows, l, b), eps).unwrap()
    }

    #[test]
    fn feasible_point_is_returned_unchanged() {
        let p = problem(&[1.0, 2.0, 0.0, 0.0, 1.0, 1.0], 2, 3, &[1.0, 1.0], 0.5);
        let q = DMatrix::from_row_slice(3, 1, &[0.3, 0.35, 0.6]);
        assert!(p.coefficient_residual_norm(&q) <= 0.5);
        assert_eq!(project_feasible(&q, &p).unwrap(), q);
    }

    #[test]
    fn affine_projection_with_orthonormal_rows() {
        let p = problem(&[0.6, 0.8, 0.0, 0.0, 0.0, 1.0], 2, 3, &[1.0, -2.0], 0.0);
        let set = FeasibleSet::new(&p).unwrap();
        assert!(set.is_closed_form());
        let q = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let alpha = set.project(&q).unwrap();
        let phi = p.phi().entries();
        let expected = &q - phi.transpose() * (phi * &q - p.b());
        assert!((&alpha - expected).amax() < 1e-15);
        assert!(p.coefficient_residual_norm(&alpha) < 1e-15);
    }

    #[test]
    fn general_operator_hits_the_boundary() {
        let p = problem(&[1.0, 2.0, 0.5, -0.3, 1.0, 1.5], 2, 3, &[1.0, 0.0, 2.0, 1.0], 0.3);
        let set = FeasibleSet::new(&p).unwrap();
        assert!(!set.is_closed_form());
        let q = DMatrix::from_row_slice(3, 2, &[4.0, -1.0, 0.0, 2.0, 1.0, 1.0]);
        let alpha = set.project(&q).unwrap();
        assert!((p.coefficient_residual_norm(&alpha) - 0.3).abs() < 1e-12);
        let again = set.project(&alpha).unwrap();
        assert!((&again - &alpha).amax() < 1e-12);
    }

    #[test]
    fn inconsistent_exact_system_is_infeasible() {
        // Rank-one operator; B has a component outside its range.
        let p = problem(&[1.0, 1.0, 2.0, 2.0], 2, 2, &[1.0, 0.0], 0.0);
        let q = DMatrix::zeros(2, 1);
        assert!(matches!(project_feasible(&q, &p), Err(MmvError::Infeasible(_))));
        // The same data is reachable once the radius covers the gap.
        let p = problem(&[1.0, 1.0, 2.0, 2.0], 2, 2, &[1.0, 0.0], 0.95);
        let alpha = project_feasible(&q, &p).unwrap();
        assert!(p.coefficient_residual_norm(&alpha) <= 0.95 + 1e-9);
    }
}
