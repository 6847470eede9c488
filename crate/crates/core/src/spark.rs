//! Numerical spark by exhaustive column-subset rank tests.

use nalgebra::DMatrix;

use crate::error::{MmvError, Result};
use crate::linalg::{select_columns, Combinations};
use crate::problem::MeasurementMatrix;

/// Largest column count accepted by [`spark`]; cost grows as `2^N`.
pub const SPARK_MAX_COLUMNS: usize = 20;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Smallest number of linearly dependent columns of `A`, or `N + 1` when all
/// columns are independent.
///
/// A subset counts as dependent when its smallest singular value is at most
/// `rank_tol` times its largest (a zero column is dependent on its own).
pub fn spark(a: &MeasurementMatrix, rank_tol: f64) -> Result<usize> {
    let (n, big_n) = (a.rows(), a.cols());
    if big_n > SPARK_MAX_COLUMNS {
        return Err(MmvError::SizeLimit(format!(
            "spark is brute force; refusing N = {big_n} > {SPARK_MAX_COLUMNS}"
        )));
    }
    if !(rank_tol >= 0.0) {
        return Err(MmvError::InvalidArgument("rank_tol must be nonnegative".into()));
    }
    for size in 1..=big_n {
        if size > n {
            // Any n + 1 vectors in R^n are dependent.
            return Ok(size);
        }
        if Combinations::new(big_n, size).any(|cols| is_dependent(&select_columns(a.entries(), &cols), rank_tol)) {
            return Ok(size);
        }
    }
    Ok(big_n + 1)
}

fn is_dependent(sub: &DMatrix<f64>, rank_tol: f64) -> bool {
    let sv = sub.singular_values();
    let max = sv.max();
    max == 0.0 || sv.min() <= rank_tol * max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mm(rows: usize, cols: usize, v: &[f64]) -> MeasurementMatrix {
        MeasurementMatrix::new(DMatrix::from_row_slice(rows, cols, v)).unwrap()
    }

    #[test]
    fn identity_is_independent() {
        for n in 1..5 {
            let a = MeasurementMatrix::new(DMatrix::identity(n, n)).unwrap();
            assert_eq!(spark(&a, DEFAULT_RANK_TOL).unwrap(), n + 1);
        }
    }

    #[test]
    fn duplicate_columns() {
        let a = mm(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0]);
        assert_eq!(spark(&a, DEFAULT_RANK_TOL).unwrap(), 2);
    }

    #[test]
    fn sum_of_columns() {
        // Exhaustive check by hand: no column is zero, no two are parallel,
        // and c3 = c1 + c2.
        let a = mm(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(spark(&a, DEFAULT_RANK_TOL).unwrap(), 3);
    }

    #[test]
    fn zero_column() {
        let a = mm(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(spark(&a, DEFAULT_RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn refuses_large() {
        let a = MeasurementMatrix::new(DMatrix::from_element(3, 21, 1.0)).unwrap();
        assert!(matches!(spark(&a, DEFAULT_RANK_TOL), Err(MmvError::SizeLimit(_))));
    }
}
