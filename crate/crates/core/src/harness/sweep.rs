use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rayon::prelude::*;

use super::{run_trial, Solver, SolverConfig, TrialResult, DEFAULT_SUCCESS_THRESHOLD};
use crate::error::{invalid, MmvError, Result};
use crate::kv::KeyValues;
use crate::smoothing::Aggregator;
use crate::synth::ProblemSpec;

pub const CSV_HEADER: &str =
    "solver,n,N,L,k,rank,noise_sigma,seed,relative_error,support_exact,inner_iters,outer_iters,wall_time_s,success";

const KNOWN_KEYS: &[&str] = &[
    "grid.k", "grid.n", "trials", "solvers", "n", "N", "L", "k", "rank", "noise", "noise_sigma", "matrix_kind",
    "seed", "success_threshold", "output", "mu_final", "max_inner_iters", "continuation_stages", "aggregator",
    "use_music", "music_delta", "max_outer", "iht_adaptive", "k_threshold",
];

/// A grid of (n, k) cells, each run for `trials` seeds with every solver.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid_k: Vec<usize>,
    pub grid_n: Vec<usize>,
    pub trials: usize,
    pub solvers: Vec<Solver>,
    /// Fields not varied by the grid, including the base seed.
    pub base: ProblemSpec,
    pub success_threshold: f64,
    pub output: Option<PathBuf>,
    pub solver: SolverConfig,
}

impl SweepConfig {
    /// Parses a flat `key = value` config. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        if let Some(key) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(MmvError::Parse(format!("unknown sweep key '{key}'")));
        }
        let base = ProblemSpec::fields_from_key_values(&kv)?;
        let mut solver = SolverConfig::default();
        solver.nesta.mu_final = kv.get("mu_final")?;
        solver.nesta.max_inner_iters = kv.get_or("max_inner_iters", solver.nesta.max_inner_iters)?;
        solver.nesta.continuation_stages = kv.get_or("continuation_stages", solver.nesta.continuation_stages)?;
        solver.nesta.aggregator = kv.get_or("aggregator", Aggregator::RowL2)?;
        solver.use_music = kv.get_or("use_music", false)?;
        solver.music_delta = kv.get_or("music_delta", solver.music_delta)?;
        solver.max_outer = kv.get_or("max_outer", solver.max_outer)?;
        solver.iht_adaptive = kv.get_or("iht_adaptive", false)?;
        solver.k_threshold = kv.get("k_threshold")?;
        let cfg = Self {
            grid_k: kv.list("grid.k")?.unwrap_or_else(|| vec![base.k]),
            grid_n: kv.list("grid.n")?.unwrap_or_else(|| vec![base.n]),
            trials: kv.get_or("trials", 1)?,
            solvers: kv.list("solvers")?.unwrap_or_else(|| vec![Solver::NestaMmv]),
            success_threshold: kv.get_or("success_threshold", DEFAULT_SUCCESS_THRESHOLD)?,
            output: kv.get::<String>("output")?.map(PathBuf::from),
            base,
            solver,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_k.is_empty() || self.grid_n.is_empty() || self.solvers.is_empty() {
            return invalid("sweep grid and solver list must be nonempty");
        }
        if self.trials < 1 {
            return invalid("trials must be at least 1");
        }
        if !(self.success_threshold > 0.0) {
            return invalid("success_threshold must be positive");
        }
        for spec in self.cell_specs() {
            spec.validate()?;
        }
        self.solver.nesta.validate()
    }

    /// Spec of each grid cell, n-major. The rank is clamped to `min(k, L)`.
    pub fn cell_specs(&self) -> Vec<ProblemSpec> {
        self.grid_n
            .iter()
            .flat_map(|&n| {
                self.grid_k.iter().map(move |&k| ProblemSpec {
                    n,
                    k,
                    rank: self.base.rank.min(k).min(self.base.l),
                    ..self.base.clone()
                })
            })
            .collect()
    }

    /// Seed of trial `t`: the base seed plus the trial index, shared by every
    /// cell and solver so comparisons are matched.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base.seed.wrapping_add(trial as u64)
    }
}

/// Summary of one (cell, solver) block.
#[derive(Debug, Clone)]
pub struct CellAggregate {
    pub spec: ProblemSpec,
    pub solver: Solver,
    pub success_rate: f64,
    pub support_exact_rate: f64,
    pub median_relative_error: f64,
    pub median_inner_iters: f64,
    pub median_outer_iters: f64,
    pub total_wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Trials in output order: cell, then solver, then trial index.
    pub trials: Vec<TrialResult>,
    pub cells: Vec<CellAggregate>,
}

impl SweepOutcome {
    pub fn cell(&self, n: usize, k: usize, solver: Solver) -> Option<&CellAggregate> {
        self.cells.iter().find(|c| c.spec.n == n && c.spec.k == k && c.solver == solver)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn aggregate(block: &[TrialResult]) -> CellAggregate {
    let count = block.len() as f64;
    let rate = |f: fn(&TrialResult) -> bool| block.iter().filter(|t| f(t)).count() as f64 / count;
    let mut errors: Vec<f64> = block.iter().map(|t| t.relative_error).collect();
    let mut inner: Vec<f64> = block.iter().map(|t| t.inner_iterations as f64).collect();
    let mut outer: Vec<f64> = block.iter().map(|t| t.outer_iterations as f64).collect();
    let first = &block[0];
    CellAggregate {
        spec: first.spec.clone(),
        solver: first.solver,
        success_rate: rate(|t| t.success),
        support_exact_rate: rate(|t| t.support_exact),
        median_relative_error: median(&mut errors),
        median_inner_iters: median(&mut inner),
        median_outer_iters: median(&mut outer),
        total_wall_time_s: block.iter().map(|t| t.wall_time.as_secs_f64()).sum(),
    }
}

fn spec_columns(spec: &ProblemSpec) -> String {
    format!("{},{},{},{},{},{}", spec.n, spec.big_n, spec.l, spec.k, spec.rank, spec.noise_sigma)
}

fn trial_row(t: &TrialResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{:.6},{}",
        t.solver,
        spec_columns(&t.spec),
        t.spec.seed,
        t.relative_error,
        u8::from(t.support_exact),
        t.inner_iterations,
        t.outer_iterations,
        t.wall_time.as_secs_f64(),
        u8::from(t.success)
    )
}

fn aggregate_row(c: &CellAggregate) -> String {
    format!(
        "{},{},aggregate,{},{},{},{},{:.6},{}",
        c.solver,
        spec_columns(&c.spec),
        c.median_relative_error,
        c.support_exact_rate,
        c.median_inner_iters,
        c.median_outer_iters,
        c.total_wall_time_s,
        c.success_rate
    )
}

/// Runs every (cell, solver, trial) combination, in parallel, and writes the
/// CSV when an output path is configured.
///
/// The file starts with a `# success_threshold = …` comment and the header;
/// each (cell, solver) block lists its trial rows followed by one aggregate
/// row whose seed column reads `aggregate`. Row order does not depend on
/// scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    // Fail on an unwritable path before spending any compute.
    let file = cfg.output.as_ref().map(File::create).transpose()?;

    let jobs: Vec<(ProblemSpec, Solver)> = cfg
        .cell_specs()
        .into_iter()
        .flat_map(|cell| {
            cfg.solvers.iter().flat_map(move |&solver| {
                let cell = cell.clone();
                (0..cfg.trials).map(move |t| (cell.with_seed(cfg.trial_seed(t)), solver))
            })
        })
        .collect();
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|(spec, solver)| run_trial(spec, *solver, &cfg.solver, cfg.success_threshold))
        .collect();
    let cells: Vec<CellAggregate> = trials.chunks(cfg.trials).map(aggregate).collect();

    if let Some(file) = file {
        let mut w = BufWriter::new(file);
        writeln!(w, "# success_threshold = {}", cfg.success_threshold)?;
        writeln!(w, "{CSV_HEADER}")?;
        for (block, cell) in trials.chunks(cfg.trials).zip(&cells) {
            for t in block {
                writeln!(w, "{}", trial_row(t))?;
            }
            writeln!(w, "{}", aggregate_row(cell))?;
        }
        w.flush()?;
    }
    Ok(SweepOutcome { trials, cells })
}
