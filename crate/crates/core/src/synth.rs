//! Seeded generation of measurement matrices and jointly row-sparse
//! ground truth.
//!
//! The random stream is `ChaCha8Rng::seed_from_u64(seed)`. Uniforms take the
//! top 53 bits of `next_u64` (offset by half an ulp so they never hit 0) and
//! normals come from the Box–Muller transform, cosine branch first. Draw
//! order: `A` row by row, the support by partial Fisher–Yates, the `k × rank`
//! and `rank × L` factors row by row, then the noise block row by row.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{invalid, MmvError, Result};
use crate::io::{load_matrix, save_matrix};
use crate::kv::KeyValues;
use crate::linalg::numerical_rank;
use crate::norms::row_support;
use crate::problem::{row_orthonormalize, MeasurementMatrix, MmvProblem};
use crate::support::SupportSet;

/// Relative singular-value tolerance for the rank of the ground truth block.
const RANK_TOL: f64 = 1e-10;
const MAX_REDRAWS: usize = 100;

/// Deterministic stream of uniform and standard normal variates.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.uniform();
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Matrix of i.i.d. standard normals, filled row by row.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let values: Vec<f64> = (0..rows * cols).map(|_| self.normal()).collect();
        DMatrix::from_row_slice(rows, cols, &values)
    }

    /// Uniformly random `k`-subset of `0..n`, sorted.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k.min(n) {
            let j = i + (self.rng.next_u64() % (n - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut out = pool[..k.min(n)].to_vec();
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatrixKind {
    Gaussian,
    #[default]
    RowOrthonormalGaussian,
}

impl FromStr for MatrixKind {
    type Err = MmvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(MatrixKind::Gaussian),
            "row-orthonormal-gaussian" | "orthonormal" => Ok(MatrixKind::RowOrthonormalGaussian),
            other => invalid(format!("unknown matrix kind '{other}'")),
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::RowOrthonormalGaussian => "row-orthonormal-gaussian",
        })
    }
}

/// Parameters of a synthetic MMV instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Measurements.
    pub n: usize,
    /// Signal dimension.
    pub big_n: usize,
    /// Channels.
    pub l: usize,
    /// Nonzero rows.
    pub k: usize,
    pub rank: usize,
    pub noise_sigma: f64,
    pub matrix_kind: MatrixKind,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.big_n < 1 || self.l < 1 || self.k < 1 || self.rank < 1 {
            return invalid("n, N, L, k and rank must all be positive");
        }
        if self.k >= self.big_n {
            return invalid(format!("k = {} must be below N = {}", self.k, self.big_n));
        }
        if self.rank > self.k.min(self.l) {
            return invalid(format!("rank {} exceeds min(k, L) = {}", self.rank, self.k.min(self.l)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid("noise_sigma must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Feasibility radius matched to the noise: `1.1·√(nL)·σ`, or 0.
    pub fn default_epsilon(&self) -> f64 {
        if self.noise_sigma == 0.0 {
            0.0
        } else {
            1.1 * ((self.n * self.l) as f64).sqrt() * self.noise_sigma
        }
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "n = {}\nN = {}\nL = {}\nk = {}\nrank = {}\nnoise_sigma = {}\nmatrix_kind = {}\nseed = {}\n",
            self.n, self.big_n, self.l, self.k, self.rank, self.noise_sigma, self.matrix_kind, self.seed
        )
    }

    /// Reads and validates the spec fields from a key-value set; `noise` is
    /// accepted as an alias of `noise_sigma`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let spec = Self::fields_from_key_values(kv)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Like [`ProblemSpec::from_key_values`] without validation, for base
    /// specs that a sweep grid will modify.
    pub fn fields_from_key_values(kv: &KeyValues) -> Result<Self> {
        let noise_sigma = match kv.get::<f64>("noise_sigma")? {
            Some(v) => v,
            None => kv.get_or("noise", 0.0)?,
        };
        let spec = Self {
            n: kv.require("n")?,
            big_n: kv.require("N")?,
            l: kv.require("L")?,
            k: kv.require("k")?,
            rank: match kv.get("rank")? {
                Some(r) => r,
                None => kv.require::<usize>("k")?.min(kv.require("L")?),
            },
            noise_sigma,
            matrix_kind: kv.get_or("matrix_kind", MatrixKind::default())?,
            seed: kv.get_or("seed", 0)?,
        };
        Ok(spec)
    }
}

/// A generated problem together with the signal that produced it.
#[derive(Debug, Clone)]
pub struct GroundTruthInstance {
    pub spec: ProblemSpec,
    pub problem: MmvProblem,
    pub x_true: DMatrix<f64>,
    pub support_true: SupportSet,
}

/// Generates the instance described by `spec`; a pure function of `spec`.
pub fn gen_instance(spec: &ProblemSpec) -> Result<GroundTruthInstance> {
    spec.validate()?;
    let mut rng = GaussianStream::new(spec.seed);
    let raw = MeasurementMatrix::new(rng.normal_matrix(spec.n, spec.big_n))?;
    let a = match spec.matrix_kind {
        MatrixKind::Gaussian => raw,
        MatrixKind::RowOrthonormalGaussian => row_orthonormalize(&raw)?,
    };
    let support = rng.subset(spec.big_n, spec.k);

    let mut block = None;
    for _ in 0..MAX_REDRAWS {
        let left = rng.normal_matrix(spec.k, spec.rank);
        let right = rng.normal_matrix(spec.rank, spec.l);
        let candidate = left * right;
        if numerical_rank(&candidate, RANK_TOL) == spec.rank
            && candidate.row_iter().all(|r| r.norm() > 0.0)
        {
            block = Some(candidate);
            break;
        }
    }
    let block = block.ok_or_else(|| MmvError::Degenerate("could not draw a full-rank signal block".into()))?;
    let mut x_true = DMatrix::zeros(spec.big_n, spec.l);
    for (i, &row) in support.iter().enumerate() {
        x_true.set_row(row, &block.row(i));
    }

    let mut b = a.entries() * &x_true;
    if spec.noise_sigma > 0.0 {
        b += rng.normal_matrix(spec.n, spec.l) * spec.noise_sigma;
    }
    let problem = MmvProblem::new(a, b, spec.default_epsilon())?;
    let support_true = SupportSet::from_sorted(support);
    debug_assert_eq!(row_support(&x_true, 0.0), support_true);
    Ok(GroundTruthInstance { spec: spec.clone(), problem, x_true, support_true })
}

/// Writes `A.csv`, `B.csv`, `X.csv` and `spec.txt` into `dir`.
pub fn export_instance(instance: &GroundTruthInstance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_matrix(dir.join("A.csv"), instance.problem.a().entries())?;
    save_matrix(dir.join("B.csv"), instance.problem.b())?;
    save_matrix(dir.join("X.csv"), &instance.x_true)?;
    fs::write(
        dir.join("spec.txt"),
        format!("{}epsilon = {}\n", instance.spec.to_key_values(), instance.problem.epsilon()),
    )?;
    Ok(())
}

/// Reads an instance written by [`export_instance`].
pub fn import_instance(dir: &Path) -> Result<GroundTruthInstance> {
    let kv = KeyValues::parse(&fs::read_to_string(dir.join("spec.txt"))?)?;
    let spec = ProblemSpec::from_key_values(&kv)?;
    let epsilon = kv.get_or("epsilon", spec.default_epsilon())?;
    let a = MeasurementMatrix::new(load_matrix(dir.join("A.csv"))?)?;
    let problem = MmvProblem::new(a, load_matrix(dir.join("B.csv"))?, epsilon)?;
    let x_true = load_matrix(dir.join("X.csv"))?;
    if x_true.nrows() != spec.big_n || x_true.ncols() != spec.l {
        return invalid("ground truth shape does not match spec");
    }
    let support_true = row_support(&x_true, 0.0);
    Ok(GroundTruthInstance { spec, problem, x_true, support_true })
}
