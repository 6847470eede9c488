use std::time::Duration;

use nalgebra::DMatrix;

use crate::support::SupportSet;

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    /// Recovered signal `X̂ = Ψ·α̂`.
    pub estimate: DMatrix<f64>,
    /// Recovered coefficients `α̂`.
    pub coefficients: DMatrix<f64>,
    pub inner_iterations: usize,
    /// Support-refinement passes; 1 for a plain solve.
    pub outer_iterations: usize,
    /// `‖A·X̂ − B‖_F`.
    pub final_residual: f64,
    pub final_objective: f64,
    pub detected_support: SupportSet,
    pub objective_trace: Vec<f64>,
    pub wall_time: Duration,
    /// False when an iteration budget ran out before the stopping rule fired.
    pub converged: bool,
}
