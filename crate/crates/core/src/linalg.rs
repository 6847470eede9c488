//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Number of singular values above `rel_tol × σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Spectral norm `‖M‖₂` by power iteration on `MᵀM`.
///
/// Starts from the all-ones vector (perturbed if it lies in the null space)
/// and stops after `max_iters` or when the relative change of the estimate
/// drops below `tol`.
pub fn spectral_norm(m: &DMatrix<f64>, max_iters: usize, tol: f64) -> f64 {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(cols, 1.0 / (cols as f64).sqrt());
    if (m * &v).norm() == 0.0 {
        v = DVector::from_fn(cols, |i, _| 1.0 + i as f64);
        v /= v.norm();
    }
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let w = m.tr_mul(&(m * &v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let next = norm.sqrt();
        let change = (next - estimate).abs();
        estimate = next;
        if change <= tol * estimate {
            break;
        }
    }
    (m * &v).norm().max(estimate)
}

/// Iterator over all `k`-subsets of `0..n` in lexicographic order.
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut advanced = false;
        for i in (0..k).rev() {
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        self.current = advanced.then_some(next);
        Some(out)
    }
}

/// Columns of `m` listed in `cols`, in that order.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}
