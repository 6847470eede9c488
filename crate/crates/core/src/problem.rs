//! Measurement operators and the MMV problem statement `‖A·Ψ·α − B‖_F ≤ ε`.

use nalgebra::DMatrix;

use crate::error::{invalid, MmvError, Result};

/// Unknown `N × L` jointly row-sparse matrix (or its coefficients under Ψ).
pub type CoefficientMatrix = DMatrix<f64>;

/// Relative tolerance for certifying `A·Aᵀ = c·I`.
pub const ROW_ORTHONORMAL_TOL: f64 = 1e-10;

/// Tolerance for accepting a sparsifying transform as orthonormal.
pub const TRANSFORM_ORTHONORMAL_TOL: f64 = 1e-10;

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what} contains non-finite entries"))
    }
}

/// An `n × N` measurement matrix together with its row-orthogonality
/// certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    entries: DMatrix<f64>,
    /// `Some(c)` when `A·Aᵀ = c·I` was certified.
    row_scale: Option<f64>,
}

impl MeasurementMatrix {
    /// Wraps `entries` and attempts row-orthogonality certification.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return invalid("measurement matrix must be non-empty");
        }
        ensure_finite(&entries, "measurement matrix")?;
        let row_scale = certify_row_scale(&entries);
        Ok(Self { entries, row_scale })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_row_orthonormal(&self) -> bool {
        self.row_scale.is_some()
    }

    /// The certified scale `c` in `A·Aᵀ = c·I`.
    pub fn row_scale(&self) -> Option<f64> {
        self.row_scale
    }

    /// More measurements than unknowns; accepted, but outside the regime
    /// the solvers target.
    pub fn is_overdetermined(&self) -> bool {
        self.rows() > self.cols()
    }
}

fn certify_row_scale(a: &DMatrix<f64>) -> Option<f64> {
    if a.nrows() > a.ncols() {
        return None;
    }
    let gram = a * a.transpose();
    let n = gram.nrows();
    let c = gram.diagonal().sum() / n as f64;
    if c <= 0.0 {
        return None;
    }
    let max_dev = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let target = if i == j { c } else { 0.0 };
            (gram[(i, j)] - target).abs()
        })
        .fold(0.0, f64::max);
    (max_dev <= ROW_ORTHONORMAL_TOL * c).then_some(c)
}

/// Orthonormalizes the rows of `A` while keeping its row space.
///
/// Returns `Ã` with `Ã·Ãᵀ = I` and the `n × n` transform `T` such that
/// `Ã = T·A`. Measurements must be co-transformed as `B̃ = T·B`.
pub fn row_orthonormalize_with_transform(
    a: &MeasurementMatrix,
) -> Result<(MeasurementMatrix, DMatrix<f64>)> {
    let (n, big_n) = (a.rows(), a.cols());
    if n > big_n {
        return Err(MmvError::Degenerate(format!(
            "{n} x {big_n} matrix cannot have full row rank"
        )));
    }
    let qr = a.entries().transpose().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        let d = r[(i, i)];
        if d.abs() <= 1e-12 * max_diag || max_diag == 0.0 {
            return Err(MmvError::Degenerate(
                "measurement matrix is rank deficient".into(),
            ));
        }
        // Positive diagonal in R makes the factorization unique.
        if d < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    let transform = r
        .transpose()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| MmvError::Degenerate("singular triangular factor".into()))?;
    let ortho = MeasurementMatrix::new(q.transpose())?;
    if !ortho.is_row_orthonormal() {
        return Err(MmvError::Degenerate(
            "row orthonormalization failed certification".into(),
        ));
    }
    Ok((ortho, transform))
}

/// Orthonormalizes the rows of `A`; see [`row_orthonormalize_with_transform`].
pub fn row_orthonormalize(a: &MeasurementMatrix) -> Result<MeasurementMatrix> {
    row_orthonormalize_with_transform(a).map(|(m, _)| m)
}

/// Measurement matrix, data block, noise radius and optional orthonormal
/// sparsifying transform. The effective operator is `Φ = A·Ψ`.
#[derive(Debug, Clone)]
pub struct MmvProblem {
    a: MeasurementMatrix,
    b: DMatrix<f64>,
    epsilon: f64,
    psi: Option<DMatrix<f64>>,
    phi: MeasurementMatrix,
}

impl MmvProblem {
    pub fn new(a: MeasurementMatrix, b: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        if b.nrows() != a.rows() {
            return invalid(format!(
                "measurement block has {} rows, expected {}",
                b.nrows(),
                a.rows()
            ));
        }
        if b.ncols() == 0 {
            return invalid("measurement block needs at least one column");
        }
        ensure_finite(&b, "measurement block")?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be finite and nonnegative, got {epsilon}"));
        }
        let phi = a.clone();
        Ok(Self { a, b, epsilon, psi: None, phi })
    }

    /// Attaches an orthonormal `N × N` sparsifying transform.
    pub fn with_transform(mut self, psi: DMatrix<f64>) -> Result<Self> {
        let big_n = self.a.cols();
        if psi.nrows() != big_n || psi.ncols() != big_n {
            return invalid(format!("transform must be {big_n} x {big_n}"));
        }
        ensure_finite(&psi, "transform")?;
        let gram = psi.transpose() * &psi;
        let dev = (&gram - DMatrix::<f64>::identity(big_n, big_n)).amax();
        if dev > TRANSFORM_ORTHONORMAL_TOL {
            return invalid(format!("transform is not orthonormal (deviation {dev:e})"));
        }
        self.phi = MeasurementMatrix::new(self.a.entries() * &psi)?;
        self.psi = Some(psi);
        Ok(self)
    }

    /// Same operator and transform, different data and radius.
    pub fn with_data(&self, b: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        let mut p = MmvProblem::new(self.a.clone(), b, epsilon)?;
        if let Some(psi) = &self.psi {
            p.phi = self.phi.clone();
            p.psi = Some(psi.clone());
        }
        Ok(p)
    }

    pub fn a(&self) -> &MeasurementMatrix {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn psi(&self) -> Option<&DMatrix<f64>> {
        self.psi.as_ref()
    }

    /// The effective operator `Φ = A·Ψ`.
    pub fn phi(&self) -> &MeasurementMatrix {
        &self.phi
    }

    /// Number of measurements `n`.
    pub fn measurements(&self) -> usize {
        self.a.rows()
    }

    /// Signal dimension `N`.
    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Number of channels `L`.
    pub fn channels(&self) -> usize {
        self.b.ncols()
    }

    /// Maps coefficients to the signal domain, `X = Ψ·α`.
    pub fn synthesize(&self, alpha: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.psi {
            Some(psi) => psi * alpha,
            None => alpha.clone(),
        }
    }

    /// `‖A·X − B‖_F` for a signal-domain estimate.
    pub fn residual_norm(&self, x: &DMatrix<f64>) -> f64 {
        (self.a.entries() * x - &self.b).norm()
    }

    /// `‖Φ·α − B‖_F` for coefficients.
    pub fn coefficient_residual_norm(&self, alpha: &DMatrix<f64>) -> f64 {
        (self.phi.entries() * alpha - &self.b).norm()
    }

    /// Single-channel subproblem for column `j`, with radius `epsilon`.
    pub fn column_problem(&self, j: usize, epsilon: f64) -> Result<Self> {
        if j >= self.channels() {
            return invalid(format!("column {j} out of range"));
        }
        self.with_data(self.b.columns(j, 1).into_owned(), epsilon)
    }
}
