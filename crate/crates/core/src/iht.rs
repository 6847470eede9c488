//! Iterative hard thresholding for jointly row-sparse recovery:
//! a gradient step on `½‖B − Φα‖²_F` followed by keeping the `k` rows of
//! largest `ℓ2` norm.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{invalid, MmvError, Result};
use crate::linalg::spectral_norm;
use crate::norms::hard_threshold_rows;
use crate::problem::MmvProblem;
use crate::report::RecoveryReport;
use crate::support::SupportSet;

/// Safety margin under the `1/‖Φ‖₂²` stability threshold.
pub const STEP_MARGIN: f64 = 0.98;

const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-10;

/// Slack on `step·‖Φ‖₂² ≤ 1` covering the power-iteration estimate.
const STEP_BOUND_SLACK: f64 = 1e-9;

/// Sufficient-decrease constant of the adaptive step rule.
const ADAPTIVE_SHRINK_C: f64 = 0.01;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct IhtConfig {
    pub k: usize,
    /// Fixed step; `None` means `0.98/‖Φ‖₂²`.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Tolerance on `‖αⁿ⁺¹ − αⁿ‖_F / max(1, ‖αⁿ‖_F)`.
    pub stop_tol: f64,
    /// Normalized IHT: per-iteration step from the current support with
    /// halving backtracking.
    pub adaptive_step: bool,
}

impl IhtConfig {
    pub fn new(k: usize) -> Self {
        Self { k, step: None, max_iters: 2000, stop_tol: 1e-8, adaptive_step: false }
    }
}

/// `‖Φ‖₂` as used for the default step.
pub fn operator_norm(phi: &DMatrix<f64>) -> f64 {
    spectral_norm(phi, POWER_ITERS, POWER_TOL)
}

fn gradient(problem: &MmvProblem, alpha: &DMatrix<f64>) -> DMatrix<f64> {
    let phi = problem.phi().entries();
    phi.tr_mul(&(problem.b() - phi * alpha))
}

/// `‖H_k(α + step·Φᵀ(B − Φα)) − α‖_F`; zero exactly at an IHT fixed point.
pub fn fixed_point_gap(problem: &MmvProblem, alpha: &DMatrix<f64>, step: f64, k: usize) -> Result<f64> {
    let next = hard_threshold_rows(&(alpha + gradient(problem, alpha) * step), k)?.0;
    Ok((next - alpha).norm())
}

fn restrict(m: &DMatrix<f64>, support: &SupportSet) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &j in support.indices() {
        out.set_row(j, &m.row(j));
    }
    out
}

/// Normalized-IHT step: exact line search on the current support, halved
/// until the sufficient-decrease test passes whenever the support moves.
fn adaptive_update(
    problem: &MmvProblem,
    alpha: &DMatrix<f64>,
    support: &SupportSet,
    k: usize,
    fallback: f64,
) -> Result<(DMatrix<f64>, SupportSet)> {
    let phi = problem.phi().entries();
    let g = gradient(problem, alpha);
    let g_s = restrict(&g, support);
    let denom = (phi * &g_s).norm_squared();
    let mut step = if denom > 0.0 { g_s.norm_squared() / denom } else { fallback };
    for _ in 0..MAX_HALVINGS {
        let (next, next_support) = hard_threshold_rows(&(alpha + &g * step), k)?;
        if &next_support == support {
            return Ok((next, next_support));
        }
        let diff = &next - alpha;
        let phi_diff = (phi * &diff).norm_squared();
        if phi_diff == 0.0 || step <= (1.0 - ADAPTIVE_SHRINK_C) * diff.norm_squared() / phi_diff {
            return Ok((next, next_support));
        }
        step /= 2.0;
    }
    hard_threshold_rows(&(alpha + &g * step), k)
}

/// Runs IHT from `α⁰ = H_k(ΦᵀB)`. The objective trace records the data
/// residual `‖B − Φαⁿ‖_F` after every iteration.
pub fn iht_solve(problem: &MmvProblem, cfg: &IhtConfig) -> Result<RecoveryReport> {
    let started = Instant::now();
    let big_n = problem.dim();
    if cfg.k < 1 || cfg.k >= big_n {
        return invalid(format!("k = {} must lie in [1, {big_n})", cfg.k));
    }
    if cfg.max_iters < 1 || !(cfg.stop_tol > 0.0) {
        return invalid("max_iters and stop_tol must be positive");
    }
    let phi = problem.phi().entries();
    let norm = operator_norm(phi);
    if norm == 0.0 {
        return Err(MmvError::Degenerate("operator is identically zero".into()));
    }
    let default_step = STEP_MARGIN / (norm * norm);
    let step = cfg.step.unwrap_or(default_step);
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("step must be positive, got {step}"));
    }
    if !cfg.adaptive_step && step * norm * norm > 1.0 + STEP_BOUND_SLACK {
        return invalid(format!(
            "step {step} violates the contraction bound 1/‖Φ‖² = {}",
            1.0 / (norm * norm)
        ));
    }

    let (mut alpha, mut support) = hard_threshold_rows(&phi.tr_mul(problem.b()), cfg.k)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (next, next_support) = if cfg.adaptive_step {
            adaptive_update(problem, &alpha, &support, cfg.k, default_step)?
        } else {
            hard_threshold_rows(&(&alpha + gradient(problem, &alpha) * step), cfg.k)?
        };
        let change = (&next - &alpha).norm() / alpha.norm().max(1.0);
        alpha = next;
        support = next_support;
        trace.push((problem.b() - phi * &alpha).norm());
        if change < cfg.stop_tol {
            converged = true;
            break;
        }
    }

    let estimate = problem.synthesize(&alpha);
    Ok(RecoveryReport {
        final_residual: problem.residual_norm(&estimate),
        final_objective: trace.last().copied().unwrap_or(0.0),
        estimate,
        coefficients: alpha,
        inner_iterations: iterations,
        outer_iterations: 1,
        detected_support: support,
        objective_trace: trace,
        wall_time: started.elapsed(),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::MeasurementMatrix;

    #[test]
    fn orthonormal_columns_recover_in_one_step() {
        // 4 x 3 operator with orthonormal columns.
        let phi = DMatrix::from_row_slice(4, 3, &[
            0.5, 0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5,
        ]);
        assert!((phi.tr_mul(&phi) - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, -1.0, 0.0, 0.0]);
        let b = &phi * &x;
        let p = MmvProblem::new(MeasurementMatrix::new(phi).unwrap(), b, 0.0).unwrap();
        let cfg = IhtConfig { step: Some(1.0), ..IhtConfig::new(1) };
        let rep = iht_solve(&p, &cfg).unwrap();
        assert_eq!(rep.inner_iterations, 1);
        assert!((&rep.estimate - &x).amax() < 1e-14);
        assert_eq!(rep.detected_support.indices(), &[1]);
    }

    #[test]
    fn zero_data_gives_zero() {
        let phi = DMatrix::from_fn(3, 6, |i, j| (i + 2 * j) as f64 % 4.0 - 1.5);
        let p = MmvProblem::new(MeasurementMatrix::new(phi).unwrap(), DMatrix::zeros(3, 2), 0.0).unwrap();
        let rep = iht_solve(&p, &IhtConfig::new(2)).unwrap();
        assert_eq!(rep.estimate, DMatrix::zeros(6, 2));
        assert_eq!(rep.inner_iterations, 1);
    }

    #[test]
    fn rejects_unstable_step() {
        let phi = DMatrix::from_fn(3, 6, |i, j| (i + 2 * j) as f64 % 4.0 - 1.5);
        let p = MmvProblem::new(MeasurementMatrix::new(phi).unwrap(), DMatrix::zeros(3, 1), 0.0).unwrap();
        let cfg = IhtConfig { step: Some(10.0), ..IhtConfig::new(2) };
        assert!(matches!(iht_solve(&p, &cfg), Err(MmvError::InvalidArgument(_))));
        assert!(iht_solve(&p, &IhtConfig::new(6)).is_err());
        assert!(iht_solve(&p, &IhtConfig { adaptive_step: true, ..cfg }).is_ok());
    }
}
