//! Experiment harness: single trials against seeded ground truth and
//! deterministic CSV sweeps.

mod sweep;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{invalid, MmvError, Result};
use crate::iht::{iht_solve, IhtConfig};
use crate::music::DEFAULT_RANK_DELTA;
use crate::nesta::{iterative_nesta, nesta_solve, IterativeConfig, NestaConfig, SUPPORT_REL_TOL};
use crate::norms::{row_norms, row_support, NormOrder};
use crate::problem::MmvProblem;
use crate::report::RecoveryReport;
use crate::support::SupportSet;
use crate::synth::{gen_instance, ProblemSpec};

pub use sweep::{run_sweep, CellAggregate, SweepConfig, SweepOutcome, CSV_HEADER};

/// Default relative-error bar for calling a trial a success.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    NestaMmv,
    IterativeNesta,
    IhtMmv,
    /// NESTA run separately on every channel, results stacked.
    NestaSmvPerColumn,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::NestaMmv, Solver::IterativeNesta, Solver::IhtMmv, Solver::NestaSmvPerColumn];
}

impl FromStr for Solver {
    type Err = MmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nesta" => Ok(Solver::NestaMmv),
            "iterative-nesta" => Ok(Solver::IterativeNesta),
            "iht" => Ok(Solver::IhtMmv),
            "smv" => Ok(Solver::NestaSmvPerColumn),
            other => invalid(format!("unknown solver '{other}' (expected nesta, iterative-nesta, iht or smv)")),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::NestaMmv => "nesta",
            Solver::IterativeNesta => "iterative-nesta",
            Solver::IhtMmv => "iht",
            Solver::NestaSmvPerColumn => "smv",
        })
    }
}

/// Settings shared by every solver a trial may run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nesta: NestaConfig,
    /// Row sparsity handed to thresholding solvers; defaults to the instance's k.
    pub k_threshold: Option<usize>,
    pub use_music: bool,
    pub music_delta: f64,
    pub max_outer: usize,
    pub iht_max_iters: usize,
    pub iht_adaptive: bool,
    /// Overrides the instance's feasibility radius.
    pub epsilon: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nesta: NestaConfig::default(),
            k_threshold: None,
            use_music: false,
            music_delta: DEFAULT_RANK_DELTA,
            max_outer: 10,
            iht_max_iters: 2000,
            iht_adaptive: false,
            epsilon: None,
        }
    }
}

fn stack_columns(columns: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = columns.first().map_or(0, |c| c.nrows());
    DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][(i, 0)])
}

/// Runs `solver` on `problem`. `k` is required by the thresholding solvers.
pub fn run_solver(problem: &MmvProblem, solver: Solver, cfg: &SolverConfig, k: Option<usize>) -> Result<RecoveryReport> {
    let need_k = || k.ok_or_else(|| MmvError::InvalidArgument(format!("solver {solver} needs a sparsity level k")));
    match solver {
        Solver::NestaMmv => nesta_solve(problem, &SupportSet::empty(), &cfg.nesta),
        Solver::IterativeNesta => {
            let it = IterativeConfig {
                use_music: cfg.use_music,
                music_delta: cfg.music_delta,
                max_outer: cfg.max_outer,
                ..IterativeConfig::new(need_k()?)
            };
            iterative_nesta(problem, &cfg.nesta, &it)
        }
        Solver::IhtMmv => {
            let iht = IhtConfig { max_iters: cfg.iht_max_iters, adaptive_step: cfg.iht_adaptive, ..IhtConfig::new(need_k()?) };
            iht_solve(problem, &iht)
        }
        Solver::NestaSmvPerColumn => run_per_column(problem, cfg),
    }
}

/// Independent single-channel solves; each channel gets radius `ε/√L` so the
/// stacked estimate stays inside the joint feasible set.
fn run_per_column(problem: &MmvProblem, cfg: &SolverConfig) -> Result<RecoveryReport> {
    let started = Instant::now();
    let channels = problem.channels();
    let eps = problem.epsilon() / (channels as f64).sqrt();
    let mut estimates = Vec::with_capacity(channels);
    let mut coefficients = Vec::with_capacity(channels);
    let mut inner = 0;
    let mut converged = true;
    let mut trace = Vec::new();
    let mut objective = 0.0;
    for j in 0..channels {
        let sub = problem.column_problem(j, eps)?;
        let mut rep = nesta_solve(&sub, &SupportSet::empty(), &cfg.nesta)?;
        inner += rep.inner_iterations;
        converged &= rep.converged;
        objective += rep.final_objective;
        trace.append(&mut rep.objective_trace);
        estimates.push(rep.estimate);
        coefficients.push(rep.coefficients);
    }
    let estimate = stack_columns(&estimates);
    let coefficients = stack_columns(&coefficients);
    let top = row_norms(&coefficients, NormOrder::Two).into_iter().fold(0.0, f64::max);
    Ok(RecoveryReport {
        final_residual: problem.residual_norm(&estimate),
        final_objective: objective,
        detected_support: row_support(&coefficients, SUPPORT_REL_TOL * top),
        estimate,
        coefficients,
        inner_iterations: inner,
        outer_iterations: 1,
        objective_trace: trace,
        wall_time: started.elapsed(),
        converged,
    })
}

/// `‖X̂ − X‖_F / ‖X‖_F` (absolute error when `X = 0`).
pub fn relative_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let diff = (estimate - truth).norm();
    let scale = truth.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// One solver run against seeded ground truth.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub spec: ProblemSpec,
    pub solver: Solver,
    pub relative_error: f64,
    pub support_exact: bool,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub residual: f64,
    pub wall_time: Duration,
    pub success: bool,
    /// Solver or generation error, if the run failed.
    pub error: Option<String>,
    pub report: Option<RecoveryReport>,
}

impl TrialResult {
    /// Compares a finished report with the ground truth.
    pub fn from_report(spec: &ProblemSpec, solver: Solver, report: RecoveryReport, truth: &DMatrix<f64>, truth_support: &SupportSet, success_threshold: f64) -> Self {
        let relative_error = relative_error(&report.estimate, truth);
        Self {
            spec: spec.clone(),
            solver,
            relative_error,
            support_exact: &report.detected_support == truth_support,
            inner_iterations: report.inner_iterations,
            outer_iterations: report.outer_iterations,
            residual: report.final_residual,
            wall_time: report.wall_time,
            success: relative_error < success_threshold,
            error: None,
            report: Some(report),
        }
    }

    fn failed(spec: &ProblemSpec, solver: Solver, err: MmvError) -> Self {
        Self {
            spec: spec.clone(),
            solver,
            relative_error: f64::NAN,
            support_exact: false,
            inner_iterations: 0,
            outer_iterations: 0,
            residual: f64::NAN,
            wall_time: Duration::ZERO,
            success: false,
            error: Some(err.to_string()),
            report: None,
        }
    }
}

/// Generates the instance for `spec`, runs `solver`, and scores the result.
/// Solver failures are recorded in the result rather than returned.
pub fn run_trial(spec: &ProblemSpec, solver: Solver, cfg: &SolverConfig, success_threshold: f64) -> TrialResult {
    let attempt = || -> Result<TrialResult> {
        let instance = gen_instance(spec)?;
        let problem = match cfg.epsilon {
            Some(eps) => instance.problem.with_data(instance.problem.b().clone(), eps)?,
            None => instance.problem.clone(),
        };
        let report = run_solver(&problem, solver, cfg, Some(cfg.k_threshold.unwrap_or(spec.k)))?;
        Ok(TrialResult::from_report(spec, solver, report, &instance.x_true, &instance.support_true, success_threshold))
    };
    attempt().unwrap_or_else(|err| TrialResult::failed(spec, solver, err))
}
