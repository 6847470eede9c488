//! MUSIC support detection: dictionary columns are scored by their distance
//! to the signal subspace spanned by the leading left singular vectors of the
//! data block.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::problem::MmvProblem;
use crate::support::SupportSet;

/// Default relative singular-value threshold for noiseless data.
pub const DEFAULT_RANK_DELTA: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MusicResult {
    /// Estimated signal-subspace dimension.
    pub rank: usize,
    /// Subspace residual of every column, in `[0, 1]`.
    pub scores: Vec<f64>,
    pub support: SupportSet,
    /// Zero columns of `Φ`; these are scored 1.
    pub zero_columns: Vec<usize>,
}

fn sorted_singular_values(b: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values of `b` above `delta × σ₁`.
pub fn estimate_rank(b: &DMatrix<f64>, delta: f64) -> usize {
    let sv = sorted_singular_values(b);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > delta * top).count(),
        _ => 0,
    }
}

/// Leading `r` left singular vectors of `b`, as columns.
fn signal_subspace(b: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    // Thin SVD of B; singular values are not ordered by nalgebra.
    let svd = b.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    DMatrix::from_fn(b.nrows(), r, |i, j| u[(i, order[j])])
}

/// `‖(I − U_s·U_sᵀ)·φ_j‖₂ / ‖φ_j‖₂` for every column of `Φ`, with `U_s` the
/// top `r` left singular vectors of `B`. Zero columns score 1.
pub fn music_scores(problem: &MmvProblem, r: usize) -> Result<Vec<f64>> {
    let b = problem.b();
    let max_r = b.nrows().min(b.ncols());
    if r < 1 || r > max_r {
        return invalid(format!("subspace dimension {r} outside [1, {max_r}]"));
    }
    let us = signal_subspace(b, r);
    let phi = problem.phi().entries();
    let scores = phi
        .column_iter()
        .map(|col| {
            let norm = col.norm();
            if norm == 0.0 {
                return 1.0;
            }
            // Explicit residual; the Pythagorean shortcut loses half the digits.
            let residual = col - &us * us.tr_mul(&col);
            (residual.norm() / norm).min(1.0)
        })
        .collect();
    Ok(scores)
}

/// Indices of the `count` smallest scores, ties by lowest index.
pub(crate) fn smallest_scores(scores: &[f64], count: usize) -> SupportSet {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
    let mut picked: Vec<usize> = order.into_iter().take(count).collect();
    picked.sort_unstable();
    SupportSet::from_sorted(picked)
}

/// Estimates the rank of `B` and selects the `k` columns closest to its
/// signal subspace.
pub fn music_support(problem: &MmvProblem, k: usize, delta: f64) -> Result<MusicResult> {
    let big_n = problem.dim();
    if k < 1 || k >= big_n {
        return invalid(format!("k = {k} must lie in [1, {big_n})"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("rank threshold must lie in (0, 1), got {delta}"));
    }
    let zero_columns: Vec<usize> = problem
        .phi()
        .entries()
        .column_iter()
        .enumerate()
        .filter(|(_, c)| c.norm() == 0.0)
        .map(|(j, _)| j)
        .collect();
    let rank = estimate_rank(problem.b(), delta);
    if rank == 0 {
        return Ok(MusicResult { rank, scores: vec![1.0; big_n], support: SupportSet::empty(), zero_columns });
    }
    let scores = music_scores(problem, rank)?;
    let support = smallest_scores(&scores, k.min(big_n));
    Ok(MusicResult { rank, scores, support, zero_columns })
}
