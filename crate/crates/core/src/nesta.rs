//! Smoothed first-order solver for
//!
//! ```text
//! min f_μ(α)   subject to   ‖Φ·α − B‖_F ≤ ε
//! ```
//!
//! One iteration with `L = 1/μ`, prox `p_p(α) = ½‖α − α₀‖²_F` (`σ_p = 1`):
//!
//! ```text
//! g_k     = ∇f_μ(α_k)
//! y_k     = P_Q(α_k − g_k / L)
//! z_k     = P_Q(α₀ − (1/L)·Σ_{i≤k} a_i g_i),     a_i = (i+1)/2
//! α_{k+1} = τ_k z_k + (1 − τ_k) y_k,             τ_k = 2/(k+3)
//! ```
//!
//! [`nesta_solve`] wraps it in a continuation loop on μ and
//! [`iterative_nesta`] adds support refinement by hard thresholding.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::music::{music_support, smallest_scores, DEFAULT_RANK_DELTA};
use crate::norms::{hard_threshold_rows, mixed_norm, row_norms, row_support, NormOrder};
use crate::problem::MmvProblem;
use crate::projection::FeasibleSet;
use crate::report::RecoveryReport;
use crate::smoothing::{smoothed_gradient_into, smoothed_objective, Aggregator, SmoothingConfig};
use crate::support::SupportSet;

/// Rows whose norm exceeds this fraction of the largest row norm count as
/// detected support for a plain solve.
pub const SUPPORT_REL_TOL: f64 = 1e-3;

/// Factor on the largest row norm of `ΦᵀB` giving the first smoothing level.
pub const MU0_FACTOR: f64 = 0.9;

/// Default final smoothing level relative to the largest row norm of `ΦᵀB`.
pub const MU_FINAL_FACTOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct NestaConfig {
    /// Final smoothing level; `None` means `1e-4 × max_j ‖(ΦᵀB)(j,:)‖₂`.
    pub mu_final: Option<f64>,
    pub continuation_stages: usize,
    /// Iteration cap per continuation stage.
    pub max_inner_iters: usize,
    pub stop_window: usize,
    pub stop_tol: f64,
    pub aggregator: Aggregator,
}

impl Default for NestaConfig {
    fn default() -> Self {
        Self {
            mu_final: None,
            continuation_stages: 4,
            max_inner_iters: 5000,
            stop_window: 10,
            stop_tol: 1e-7,
            aggregator: Aggregator::RowL2,
        }
    }
}

impl NestaConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.mu_final {
            if !(mu > 0.0 && mu.is_finite()) {
                return invalid(format!("mu_final must be positive, got {mu}"));
            }
        }
        if self.continuation_stages < 1 {
            return invalid("continuation_stages must be at least 1");
        }
        if self.max_inner_iters < 1 {
            return invalid("max_inner_iters must be at least 1");
        }
        if self.stop_window < 2 {
            return invalid("stop_window must be at least 2");
        }
        if !(self.stop_tol > 0.0) {
            return invalid("stop_tol must be positive");
        }
        Ok(())
    }

    /// Geometric decay factor `(μ_final/μ₀)^(1/stages)`.
    pub fn continuation_ratio(&self, mu0: f64, mu_final: f64) -> f64 {
        (mu_final / mu0).powf(1.0 / self.continuation_stages as f64)
    }
}

/// Weight `a_k = (k+1)/2` of the k-th gradient in the accumulated sum.
pub fn gradient_weight(k: usize) -> f64 {
    (k as f64 + 1.0) / 2.0
}

/// Averaging coefficient `τ_k = 2/(k+3)`.
pub fn averaging_weight(k: usize) -> f64 {
    2.0 / (k as f64 + 3.0)
}

/// Iterates of one smoothed solve at fixed μ.
#[derive(Debug, Clone)]
pub struct NestaState {
    pub k: usize,
    pub alpha: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// Prox center `α₀`.
    pub prox_center: DMatrix<f64>,
    /// `Σ_{i<k} a_i ∇f(α_i)`.
    pub grad_accum: DMatrix<f64>,
    /// `f_μ(y_k)` after each step.
    pub objective_trace: Vec<f64>,
    grad: DMatrix<f64>,
}

impl NestaState {
    /// Starts at `alpha0`, which also becomes the prox center.
    pub fn new(alpha0: DMatrix<f64>) -> Self {
        let zeros = DMatrix::zeros(alpha0.nrows(), alpha0.ncols());
        Self {
            k: 0,
            y: alpha0.clone(),
            z: alpha0.clone(),
            prox_center: alpha0.clone(),
            alpha: alpha0,
            grad_accum: zeros.clone(),
            objective_trace: Vec::new(),
            grad: zeros,
        }
    }
}

/// `y ← a·x + b·y`.
fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>, b: f64) {
    y.zip_apply(x, |yi, xi| *yi = a * xi + b * *yi);
}

/// Performs one iteration in place.
pub fn nesta_step(state: &mut NestaState, set: &FeasibleSet<'_>, smoothing: &SmoothingConfig) -> Result<()> {
    let mu = smoothing.mu();
    let k = state.k;
    smoothed_gradient_into(&state.alpha, smoothing, &mut state.grad);

    let mut target = state.alpha.clone();
    axpy(&mut target, -mu, &state.grad, 1.0);
    state.y = set.project(&target)?;

    axpy(&mut state.grad_accum, gradient_weight(k), &state.grad, 1.0);
    target.copy_from(&state.prox_center);
    axpy(&mut target, -mu, &state.grad_accum, 1.0);
    state.z = set.project(&target)?;

    let tau = averaging_weight(k);
    state.alpha.copy_from(&state.y);
    axpy(&mut state.alpha, tau, &state.z, 1.0 - tau);

    state.objective_trace.push(smoothed_objective(&state.y, smoothing));
    state.k += 1;
    Ok(())
}

/// Variation of the newest objective value against the mean of the `window`
/// values before it, relative to `max(mean, floor)`; `None` until enough
/// values exist. The floor keeps the rule meaningful when the objective
/// itself tends to zero (all penalized rows vanish).
fn windowed_variation(trace: &[f64], window: usize, floor: f64) -> Option<f64> {
    if trace.len() <= window {
        return None;
    }
    let (&last, rest) = trace.split_last()?;
    let mean = rest[rest.len() - window..].iter().sum::<f64>() / window as f64;
    let scale = mean.max(floor);
    Some(if scale > 0.0 {
        (last - mean).abs() / scale
    } else if last == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Runs one fixed-μ stage from `start` until the windowed objective
/// variation drops below `stop_tol` or the iteration cap is hit. Returns the
/// final state and whether the stopping rule fired.
///
/// `objective_floor` is the smallest denominator of the relative variation;
/// the solvers pass the largest row norm of `ΦᵀB`.
pub fn run_stage(
    start: DMatrix<f64>,
    set: &FeasibleSet<'_>,
    smoothing: &SmoothingConfig,
    cfg: &NestaConfig,
    objective_floor: f64,
) -> Result<(NestaState, bool)> {
    let mut state = NestaState::new(start);
    for _ in 0..cfg.max_inner_iters {
        nesta_step(&mut state, set, smoothing)?;
        if let Some(v) = windowed_variation(&state.objective_trace, cfg.stop_window, objective_floor) {
            if v < cfg.stop_tol {
                return Ok((state, true));
            }
        }
    }
    Ok((state, false))
}

fn max_row_norm(m: &DMatrix<f64>, rows: Option<&[bool]>) -> f64 {
    row_norms(m, NormOrder::Two)
        .into_iter()
        .enumerate()
        .filter(|(j, _)| rows.map_or(true, |known| !known[*j]))
        .map(|(_, v)| v)
        .fold(0.0, f64::max)
}

fn unsmoothed_objective(alpha: &DMatrix<f64>, aggregator: Aggregator, known: &SupportSet) -> f64 {
    let mut masked = alpha.clone();
    for &j in known.indices() {
        masked.row_mut(j).fill(0.0);
    }
    let inner = match aggregator {
        Aggregator::RowL2 => NormOrder::Two,
        Aggregator::EntryL1 => NormOrder::One,
    };
    mixed_norm(&masked, NormOrder::One, inner).unwrap_or(f64::NAN)
}

fn finish(
    problem: &MmvProblem,
    alpha: DMatrix<f64>,
    known: &SupportSet,
    aggregator: Aggregator,
    inner: usize,
    trace: Vec<f64>,
    converged: bool,
    started: Instant,
) -> RecoveryReport {
    let estimate = problem.synthesize(&alpha);
    let top = max_row_norm(&alpha, None);
    RecoveryReport {
        final_residual: problem.residual_norm(&estimate),
        final_objective: unsmoothed_objective(&alpha, aggregator, known),
        detected_support: row_support(&alpha, SUPPORT_REL_TOL * top),
        estimate,
        coefficients: alpha,
        inner_iterations: inner,
        outer_iterations: 1,
        objective_trace: trace,
        wall_time: started.elapsed(),
        converged,
    }
}

/// Solves the smoothed problem with continuation on μ, leaving the rows in
/// `known_support` unpenalized.
///
/// μ₀ is `0.9 ×` the largest row norm of `ΦᵀB` outside the known support and
/// decays geometrically to `mu_final`. Each stage warm-starts from the
/// previous stage's `y` and re-centers the prox term there. The report's
/// `final_objective` is the unsmoothed mixed norm over the unknown rows.
pub fn nesta_solve(problem: &MmvProblem, known_support: &SupportSet, cfg: &NestaConfig) -> Result<RecoveryReport> {
    cfg.validate()?;
    let started = Instant::now();
    let big_n = problem.dim();
    if known_support.indices().last().is_some_and(|&j| j >= big_n) {
        return invalid("known support index out of range");
    }
    let shape = (big_n, problem.channels());
    if problem.b().norm() <= problem.epsilon() {
        let zero = DMatrix::zeros(shape.0, shape.1);
        return Ok(finish(problem, zero, known_support, cfg.aggregator, 0, Vec::new(), true, started));
    }

    let set = FeasibleSet::new(problem)?;
    let mut current = set.project(&DMatrix::zeros(shape.0, shape.1))?;
    let correlation = problem.phi().entries().tr_mul(problem.b());
    let known_mask = known_support.mask(big_n);
    let mut mu0 = MU0_FACTOR * max_row_norm(&correlation, Some(&known_mask));
    if mu0 == 0.0 {
        mu0 = MU0_FACTOR * max_row_norm(&current, None);
    }
    if mu0 == 0.0 {
        return Ok(finish(problem, current, known_support, cfg.aggregator, 0, Vec::new(), true, started));
    }
    let scale = match max_row_norm(&correlation, None) {
        s if s > 0.0 => s,
        _ => mu0 / MU0_FACTOR,
    };
    let mu_final = cfg.mu_final.unwrap_or(MU_FINAL_FACTOR * scale);
    let schedule: Vec<f64> = if mu_final >= mu0 {
        vec![mu_final]
    } else {
        let ratio = cfg.continuation_ratio(mu0, mu_final);
        (1..=cfg.continuation_stages)
            .map(|t| if t == cfg.continuation_stages { mu_final } else { mu0 * ratio.powi(t as i32) })
            .collect()
    };

    let mut inner = 0;
    let mut trace = Vec::new();
    let mut converged = true;
    for mu in schedule {
        let smoothing = SmoothingConfig::new(mu, cfg.aggregator)?.with_known_support(known_support.clone());
        let (state, stopped) = run_stage(current, &set, &smoothing, cfg, scale)?;
        inner += state.k;
        converged &= stopped;
        trace.extend_from_slice(&state.objective_trace);
        current = state.y;
    }
    Ok(finish(problem, current, known_support, cfg.aggregator, inner, trace, converged, started))
}

/// How a recovered estimate is turned into the next known support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Keep the `k` rows of largest norm.
    KeepLargest,
    /// Keep rows whose norm exceeds this fraction of the largest row norm.
    RelativeCutoff(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeConfig {
    /// Target row sparsity.
    pub k: usize,
    pub max_outer: usize,
    /// Seed the first pass with MUSIC-detected rows.
    pub use_music: bool,
    pub music_delta: f64,
    pub threshold: ThresholdRule,
}

impl IterativeConfig {
    pub fn new(k: usize) -> Self {
        Self { k, max_outer: 10, use_music: false, music_delta: DEFAULT_RANK_DELTA, threshold: ThresholdRule::KeepLargest }
    }
}

/// MUSIC seed: the `min(rank, k)` columns with the smallest scores.
pub fn music_seed(problem: &MmvProblem, k: usize, delta: f64) -> Result<SupportSet> {
    let res = music_support(problem, k, delta)?;
    Ok(smallest_scores(&res.scores, res.rank.min(k)))
}

/// Alternates [`nesta_solve`] with hard-threshold support selection until
/// the selected support repeats or `max_outer` passes have run.
pub fn iterative_nesta(problem: &MmvProblem, cfg: &NestaConfig, it: &IterativeConfig) -> Result<RecoveryReport> {
    let started = Instant::now();
    let big_n = problem.dim();
    if it.k < 1 || it.k >= big_n {
        return invalid(format!("k = {} must lie in [1, {big_n})", it.k));
    }
    if it.max_outer < 1 {
        return invalid("max_outer must be at least 1");
    }
    if let ThresholdRule::RelativeCutoff(f) = it.threshold {
        if !(0.0..1.0).contains(&f) {
            return invalid(format!("relative cutoff must lie in [0, 1), got {f}"));
        }
    }
    let mut known = if it.use_music { music_seed(problem, it.k, it.music_delta)? } else { SupportSet::empty() };

    let mut inner = 0;
    let mut trace = Vec::new();
    let mut outer = 0;
    let mut converged = true;
    loop {
        outer += 1;
        let mut report = nesta_solve(problem, &known, cfg)?;
        inner += report.inner_iterations;
        converged &= report.converged;
        trace.append(&mut report.objective_trace);
        let next = match it.threshold {
            ThresholdRule::KeepLargest => hard_threshold_rows(&report.coefficients, it.k)?.1,
            ThresholdRule::RelativeCutoff(f) => {
                row_support(&report.coefficients, f * max_row_norm(&report.coefficients, None))
            }
        };
        let stable = next == known;
        if stable || outer >= it.max_outer {
            report.inner_iterations = inner;
            report.outer_iterations = outer;
            report.objective_trace = trace;
            report.detected_support = next;
            report.converged = converged && stable;
            report.wall_time = started.elapsed();
            return Ok(report);
        }
        known = next;
    }
}
