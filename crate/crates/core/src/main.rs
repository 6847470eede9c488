use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mmv_core::error::{MmvError, Result};
use mmv_core::harness::{relative_error, run_solver, run_sweep, Solver, SolverConfig, SweepConfig};
use mmv_core::io::{load_matrix, save_matrix};
use mmv_core::kv::KeyValues;
use mmv_core::music::{music_support, DEFAULT_RANK_DELTA};
use mmv_core::problem::{MeasurementMatrix, MmvProblem};
use mmv_core::spark::{spark, DEFAULT_RANK_TOL};
use mmv_core::synth::{gen_instance, MatrixKind, ProblemSpec};

#[derive(Parser)]
#[command(name = "mmv", version, about = "Joint-sparse recovery from multiple measurement vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one instance and print a one-line summary.
    Solve(SolveArgs),
    /// Run a parameter sweep described by a key-value config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the numerical spark of a matrix (N ≤ 20).
    Spark {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// MUSIC support detection for a dictionary and data block.
    Music {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_RANK_DELTA)]
        delta: f64,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Problem spec file (key = value lines).
    #[arg(long, conflicts_with_all = ["n", "big_n", "l", "k", "rank", "noise", "seed", "load_matrix"])]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "N")]
    big_n: Option<usize>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    matrix_kind: Option<MatrixKind>,
    /// Measurement matrix CSV; solves external data without ground truth.
    #[arg(long, requires = "load_data")]
    load_matrix: Option<PathBuf>,
    /// Measurement block CSV paired with --load-matrix.
    #[arg(long, requires = "load_matrix")]
    load_data: Option<PathBuf>,
    #[arg(long, default_value = "nesta")]
    solver: Solver,
    /// Feasibility radius; defaults to the instance's noise-matched value.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    mu_final: Option<f64>,
    /// Row sparsity for iterative-nesta and iht (defaults to k).
    #[arg(long)]
    k_threshold: Option<usize>,
    #[arg(long)]
    use_music: bool,
    #[arg(long)]
    dump_estimate: Option<PathBuf>,
}

fn spec_from_flags(args: &SolveArgs) -> Result<ProblemSpec> {
    if let Some(path) = &args.spec {
        return ProblemSpec::from_key_values(&KeyValues::parse(&fs::read_to_string(path)?)?);
    }
    let missing = |name: &str| MmvError::InvalidArgument(format!("--{name} is required without --spec"));
    let k = args.k.ok_or_else(|| missing("k"))?;
    let l = args.l.ok_or_else(|| missing("L"))?;
    let spec = ProblemSpec {
        n: args.n.ok_or_else(|| missing("n"))?,
        big_n: args.big_n.ok_or_else(|| missing("N"))?,
        l,
        k,
        rank: args.rank.unwrap_or(k.min(l)),
        noise_sigma: args.noise.unwrap_or(0.0),
        matrix_kind: args.matrix_kind.unwrap_or_default(),
        seed: args.seed.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

fn solve(args: SolveArgs) -> Result<()> {
    let cfg = {
        let mut c = SolverConfig { k_threshold: args.k_threshold, use_music: args.use_music, epsilon: args.eps, ..Default::default() };
        c.nesta.mu_final = args.mu_final;
        c
    };
    let (problem, truth, k) = match (&args.load_matrix, &args.load_data) {
        (Some(a), Some(b)) => {
            let a = MeasurementMatrix::new(load_matrix(a)?)?;
            let problem = MmvProblem::new(a, load_matrix(b)?, args.eps.unwrap_or(0.0))?;
            (problem, None, args.k_threshold.or(args.k))
        }
        _ => {
            let spec = spec_from_flags(&args)?;
            let instance = gen_instance(&spec)?;
            let problem = match args.eps {
                Some(eps) => instance.problem.with_data(instance.problem.b().clone(), eps)?,
                None => instance.problem,
            };
            (problem, Some(instance.x_true), Some(args.k_threshold.unwrap_or(spec.k)))
        }
    };
    let report = run_solver(&problem, args.solver, &cfg, k)?;
    let mut line = format!("solver={}", args.solver);
    if let Some(truth) = &truth {
        line.push_str(&format!(" relative_error={:e}", relative_error(&report.estimate, truth)));
    }
    line.push_str(&format!(
        " residual={:e} inner_iters={} outer_iters={} converged={} support={} wall_time_s={:.6}",
        report.final_residual,
        report.inner_iterations,
        report.outer_iterations,
        report.converged,
        report.detected_support,
        report.wall_time.as_secs_f64()
    ));
    println!("{line}");
    if let Some(path) = &args.dump_estimate {
        save_matrix(path, &report.estimate)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep { config } => {
            let cfg = SweepConfig::parse(&fs::read_to_string(&config)?)?;
            if cfg.output.is_none() {
                return Err(MmvError::InvalidArgument("sweep config needs an 'output' path".into()));
            }
            let outcome = run_sweep(&cfg)?;
            for c in &outcome.cells {
                println!(
                    "solver={} n={} k={} success_rate={} median_inner_iters={}",
                    c.solver, c.spec.n, c.spec.k, c.success_rate, c.median_inner_iters
                );
            }
            Ok(())
        }
        Command::Spark { matrix, tol } => {
            let a = MeasurementMatrix::new(load_matrix(matrix)?)?;
            println!("{}", spark(&a, tol)?);
            Ok(())
        }
        Command::Music { matrix, data, k, delta } => {
            let a = MeasurementMatrix::new(load_matrix(matrix)?)?;
            let problem = MmvProblem::new(a, load_matrix(data)?, 0.0)?;
            let res = music_support(&problem, k, delta)?;
            let indices: Vec<String> = res.support.indices().iter().map(|i| i.to_string()).collect();
            println!("rank={} support={}", res.rank, indices.join(","));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
