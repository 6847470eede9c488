//! Mixed row norms, row-wise hard thresholding and support extraction.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{invalid, MmvError, Result};
use crate::support::SupportSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormOrder {
    One,
    Two,
    Inf,
}

impl NormOrder {
    fn of<'a>(self, values: impl Iterator<Item = &'a f64>) -> f64 {
        match self {
            NormOrder::One => values.map(|v| v.abs()).sum(),
            NormOrder::Two => values.map(|v| v * v).sum::<f64>().sqrt(),
            NormOrder::Inf => values.fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl FromStr for NormOrder {
    type Err = MmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "inf" | "Inf" | "INF" | "∞" => Ok(NormOrder::Inf),
            other => invalid(format!("unsupported norm order '{other}'")),
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Inf => "inf",
        })
    }
}

/// Per-row `ℓ_q` norms.
pub fn row_norms(x: &DMatrix<f64>, q: NormOrder) -> Vec<f64> {
    x.row_iter().map(|row| q.of(row.iter())).collect()
}

/// Mixed `ℓ_{p,q}` norm: the `ℓ_p` norm of the per-row `ℓ_q` norms.
/// Only `p ∈ {1, 2}` is supported.
pub fn mixed_norm(x: &DMatrix<f64>, p: NormOrder, q: NormOrder) -> Result<f64> {
    if p == NormOrder::Inf {
        return invalid("outer norm order must be 1 or 2");
    }
    Ok(p.of(row_norms(x, q).iter()))
}

/// Row indices ordered by decreasing `ℓ2` norm, ties by lowest index.
pub(crate) fn rows_by_decreasing_norm(norms: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    order
}

/// Keeps the `k` rows of largest `ℓ2` norm and zeroes the rest.
pub fn hard_threshold_rows(x: &DMatrix<f64>, k: usize) -> Result<(DMatrix<f64>, SupportSet)> {
    if k < 1 {
        return invalid("hard threshold level k must be at least 1");
    }
    let big_n = x.nrows();
    if k >= big_n {
        return Ok((x.clone(), SupportSet::full(big_n)));
    }
    let norms = row_norms(x, NormOrder::Two);
    let mut kept: Vec<usize> = rows_by_decreasing_norm(&norms).into_iter().take(k).collect();
    kept.sort_unstable();
    let mut out = DMatrix::zeros(big_n, x.ncols());
    for &i in &kept {
        out.set_row(i, &x.row(i));
    }
    Ok((out, SupportSet::from_sorted(kept)))
}

/// Rows whose `ℓ2` norm exceeds `tol`.
pub fn row_support(x: &DMatrix<f64>, tol: f64) -> SupportSet {
    SupportSet::from_sorted(
        row_norms(x, NormOrder::Two)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > tol)
            .map(|(i, _)| i)
            .collect(),
    )
}
