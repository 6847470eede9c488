//! Nesterov-smoothed mixed norm and its gradient.
//!
//! With the Frobenius prox `p_d(u) = ½‖u‖²` and a unit dual ball, the
//! smoothed value of a nonnegative magnitude `t` is the Huber function
//!
//! ```text
//! h_μ(t) = t − μ/2      if t ≥ μ
//!        = t² / (2μ)    otherwise
//! ```
//!
//! `RowL2` applies it to each row's `ℓ2` norm (dual ball: row-wise `ℓ2`
//! balls, objective `ℓ_{1,2}`), `EntryL1` to each entry's magnitude (dual
//! ball: `‖U‖_∞ ≤ 1`, objective `ℓ_{1,1}`). Rows in the known support are
//! dropped from both the value and the gradient. The gradient is
//! `1/μ`-Lipschitz in both cases.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{invalid, MmvError, Result};
use crate::support::SupportSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    /// Smooths `‖α(j,:)‖₂`; the joint-sparsity objective.
    #[default]
    RowL2,
    /// Smooths every `|α(j,l)|` separately.
    EntryL1,
}

impl FromStr for Aggregator {
    type Err = MmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "row-l2" | "l12" => Ok(Aggregator::RowL2),
            "entry-l1" | "l11" => Ok(Aggregator::EntryL1),
            other => invalid(format!("unknown aggregator '{other}'")),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::RowL2 => "row-l2",
            Aggregator::EntryL1 => "entry-l1",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingConfig {
    mu: f64,
    pub aggregator: Aggregator,
    pub known_support: SupportSet,
}

impl SmoothingConfig {
    pub fn new(mu: f64, aggregator: Aggregator) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return invalid(format!("smoothing parameter must be positive, got {mu}"));
        }
        Ok(Self { mu, aggregator, known_support: SupportSet::empty() })
    }

    pub fn with_known_support(mut self, support: SupportSet) -> Self {
        self.known_support = support;
        self
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Lipschitz constant of the gradient, `1/μ`.
    pub fn lipschitz(&self) -> f64 {
        1.0 / self.mu
    }
}

/// Huber smoothing of a magnitude `t ≥ 0`.
pub fn huber(t: f64, mu: f64) -> f64 {
    if t >= mu {
        t - 0.5 * mu
    } else {
        t * t / (2.0 * mu)
    }
}

/// `f_μ(α)` summed over rows outside the known support.
pub fn smoothed_objective(alpha: &DMatrix<f64>, cfg: &SmoothingConfig) -> f64 {
    let mask = cfg.known_support.mask(alpha.nrows());
    let mu = cfg.mu;
    alpha
        .row_iter()
        .zip(mask)
        .filter(|(_, known)| !known)
        .map(|(row, _)| match cfg.aggregator {
            Aggregator::RowL2 => huber(row.norm(), mu),
            Aggregator::EntryL1 => row.iter().map(|v| huber(v.abs(), mu)).sum(),
        })
        .sum()
}

/// `∇f_μ(α)`; every row (or entry) has norm at most 1.
pub fn smoothed_gradient(alpha: &DMatrix<f64>, cfg: &SmoothingConfig) -> DMatrix<f64> {
    let mut grad = alpha.clone();
    smoothed_gradient_into(alpha, cfg, &mut grad);
    grad
}

pub(crate) fn smoothed_gradient_into(alpha: &DMatrix<f64>, cfg: &SmoothingConfig, grad: &mut DMatrix<f64>) {
    let mask = cfg.known_support.mask(alpha.nrows());
    let mu = cfg.mu;
    grad.copy_from(alpha);
    for (j, known) in mask.into_iter().enumerate() {
        let mut row = grad.row_mut(j);
        if known {
            row.fill(0.0);
            continue;
        }
        match cfg.aggregator {
            Aggregator::RowL2 => {
                let norm = row.norm();
                row /= norm.max(mu);
            }
            Aggregator::EntryL1 => {
                for v in row.iter_mut() {
                    *v /= v.abs().max(mu);
                }
            }
        }
    }
}
