//! Model parameters for the detailed-balanced SKT system.
//!
//! Two parameterisations live here. [`ModelParams`] carries the macroscopic
//! coefficients `(D_i, A_ij, π_i)` used by the PDE and its spatial
//! discretisation. [`MicroParams`] carries the particle-level jump rates
//! `(D_i, D_ij, π_i)` with `D_ij` symmetric. The two are linked by
//! `A_ij = D_ij π_j`, under which detailed balance `π_i A_ij = π_j A_ji`
//! holds automatically.

use std::fmt;

use ndarray::Array2;
use thiserror::Error;

/// Default relative tolerance for the detailed balance check.
pub const DEFAULT_TOL_DB: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("species count must be positive")]
    Empty,
    #[error("invalid model parameters: {0}")]
    Invalid(ValidationReport),
}

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeDiffusion { species: usize, value: f64 },
    NonPositiveWeight { species: usize, value: f64 },
    NegativeCoefficient { i: usize, j: usize, value: f64 },
    NonPositiveSelfDiffusion { species: usize, value: f64 },
    DetailedBalance { i: usize, j: usize, lhs: f64, rhs: f64 },
    NonFinite { what: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeDiffusion { species, value } => {
                write!(f, "diffusion rate D_{} = {value} is negative", species + 1)
            }
            Violation::NonPositiveWeight { species, value } => {
                write!(f, "weight pi_{} = {value} is not strictly positive", species + 1)
            }
            Violation::NegativeCoefficient { i, j, value } => {
                write!(f, "coefficient A_{}{} = {value} is negative", i + 1, j + 1)
            }
            Violation::NonPositiveSelfDiffusion { species, value } => write!(
                f,
                "self-diffusion A_{0}{0} = {value} is not strictly positive",
                species + 1
            ),
            Violation::DetailedBalance { i, j, lhs, rhs } => write!(
                f,
                "detailed balance violated: pi_{0} A_{0}{1} = {lhs} but pi_{1} A_{1}{0} = {rhs}",
                i + 1,
                j + 1
            ),
            Violation::NonFinite { what } => write!(f, "{what} contains a non-finite value"),
        }
    }
}

/// Outcome of [`ModelParams::validate`]. An empty report means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_detailed_balance_violation(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::DetailedBalance { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (idx, v) in self.violations.iter().enumerate() {
            if idx > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Macroscopic coefficients of `∂_t u_i = Δ(D_i u_i + Σ_j A_ij u_i u_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    d: Vec<f64>,
    a: Array2<f64>,
    pi: Vec<f64>,
}

impl ModelParams {
    /// Builds and fully validates parameters with tolerance `tol_db`.
    pub fn new(d: Vec<f64>, a: Array2<f64>, pi: Vec<f64>, tol_db: f64) -> Result<Self, ModelError> {
        let params = Self::new_unchecked(d, a, pi)?;
        let report = params.validate(tol_db);
        if report.is_valid() {
            Ok(params)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    /// Structural checks only. Useful for linear reductions (`A = 0`) that the
    /// full invariants reject.
    pub fn new_unchecked(d: Vec<f64>, a: Array2<f64>, pi: Vec<f64>) -> Result<Self, ModelError> {
        let n = d.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if pi.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "pi has {} entries, D has {n}",
                pi.len()
            )));
        }
        if a.dim() != (n, n) {
            return Err(ModelError::DimensionMismatch(format!(
                "A is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { d, a, pi })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(d: &[f64], a: &[Vec<f64>], pi: &[f64], tol_db: f64) -> Result<Self, ModelError> {
        let a = rows_to_matrix(a, d.len())?;
        Self::new(d.to_vec(), a, pi.to_vec(), tol_db)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// `max_i D_i`.
    pub fn max_d(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// `max_i Σ_j A_ij`.
    pub fn max_row_sum(&self) -> f64 {
        self.a
            .rows()
            .into_iter()
            .map(|r| r.sum())
            .fold(0.0, f64::max)
    }

    /// Lists every violated invariant: `D_i ≥ 0`, `π_i > 0`, `A_ij ≥ 0`,
    /// `A_ii > 0` and `|π_i A_ij − π_j A_ji| ≤ tol_db · max(1, |π_i A_ij|)`.
    pub fn validate(&self, tol_db: f64) -> ValidationReport {
        let n = self.n();
        let mut violations = Vec::new();
        if self.d.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite { what: "D" });
        }
        if self.pi.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite { what: "pi" });
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite { what: "A" });
        }
        for (i, &di) in self.d.iter().enumerate() {
            if di < 0.0 {
                violations.push(Violation::NegativeDiffusion { species: i, value: di });
            }
        }
        for (i, &pi) in self.pi.iter().enumerate() {
            if !(pi > 0.0) {
                violations.push(Violation::NonPositiveWeight { species: i, value: pi });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let aij = self.a[[i, j]];
                if aij < 0.0 {
                    violations.push(Violation::NegativeCoefficient { i, j, value: aij });
                }
            }
            let aii = self.a[[i, i]];
            if !(aii > 0.0) {
                violations.push(Violation::NonPositiveSelfDiffusion { species: i, value: aii });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let lhs = self.pi[i] * self.a[[i, j]];
                let rhs = self.pi[j] * self.a[[j, i]];
                if (lhs - rhs).abs() > tol_db * lhs.abs().max(1.0) {
                    violations.push(Violation::DetailedBalance { i, j, lhs, rhs });
                }
            }
        }
        ValidationReport { violations }
    }
}

/// Particle-level rates: single jumps at `D_i`, co-located pair jumps at
/// `D_ij / N` with `D_ij = D_ji`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroParams {
    d: Vec<f64>,
    dij: Array2<f64>,
    pi: Vec<f64>,
}

impl MicroParams {
    /// The pair-rate matrix is symmetrised as `(D + Dᵀ) / 2`.
    pub fn new(d: Vec<f64>, dij: Array2<f64>, pi: Vec<f64>) -> Result<Self, ModelError> {
        let n = d.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if pi.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "pi has {} entries, D has {n}",
                pi.len()
            )));
        }
        if dij.dim() != (n, n) {
            return Err(ModelError::DimensionMismatch(format!(
                "Dij is {}x{}, expected {n}x{n}",
                dij.nrows(),
                dij.ncols()
            )));
        }
        let mut violations = Vec::new();
        for (i, &di) in d.iter().enumerate() {
            if !(di >= 0.0) || !di.is_finite() {
                violations.push(Violation::NegativeDiffusion { species: i, value: di });
            }
        }
        for (i, &p) in pi.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                violations.push(Violation::NonPositiveWeight { species: i, value: p });
            }
        }
        for ((i, j), &v) in dij.indexed_iter() {
            if !(v >= 0.0) || !v.is_finite() {
                violations.push(Violation::NegativeCoefficient { i, j, value: v });
            }
        }
        if !violations.is_empty() {
            return Err(ModelError::Invalid(ValidationReport { violations }));
        }
        let sym = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                dij[[i, i]]
            } else {
                0.5 * (dij[[i, j]] + dij[[j, i]])
            }
        });
        Ok(Self { d, dij: sym, pi })
    }

    pub fn from_rows(d: &[f64], dij: &[Vec<f64>], pi: &[f64]) -> Result<Self, ModelError> {
        let m = rows_to_matrix(dij, d.len())?;
        Self::new(d.to_vec(), m, pi.to_vec())
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn dij(&self) -> &Array2<f64> {
        &self.dij
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Weights rescaled to sum to one, as used for particle counts.
    pub fn normalised_pi(&self) -> Vec<f64> {
        let s: f64 = self.pi.iter().sum();
        self.pi.iter().map(|p| p / s).collect()
    }

    /// Same rates with normalised weights.
    pub fn with_normalised_pi(&self) -> Self {
        Self {
            d: self.d.clone(),
            dij: self.dij.clone(),
            pi: self.normalised_pi(),
        }
    }
}

/// `A_ij = D_ij π_j`.
pub fn micro_to_macro(micro: &MicroParams) -> ModelParams {
    let n = micro.n();
    let a = Array2::from_shape_fn((n, n), |(i, j)| micro.dij[[i, j]] * micro.pi[j]);
    ModelParams {
        d: micro.d.clone(),
        a,
        pi: micro.pi.clone(),
    }
}

/// Inverse of [`micro_to_macro`]: `D_ij = A_ij / π_j`, rejected when the
/// input violates detailed balance at [`DEFAULT_TOL_DB`].
pub fn macro_to_micro(params: &ModelParams) -> Result<MicroParams, ModelError> {
    macro_to_micro_with_tol(params, DEFAULT_TOL_DB)
}

pub fn macro_to_micro_with_tol(params: &ModelParams, tol_db: f64) -> Result<MicroParams, ModelError> {
    let report = params.validate(tol_db);
    let db: Vec<Violation> = report
        .violations
        .into_iter()
        .filter(|v| matches!(v, Violation::DetailedBalance { .. } | Violation::NonPositiveWeight { .. }))
        .collect();
    if !db.is_empty() {
        return Err(ModelError::Invalid(ValidationReport { violations: db }));
    }
    let n = params.n();
    let dij = Array2::from_shape_fn((n, n), |(i, j)| params.a[[i, j]] / params.pi[j]);
    MicroParams::new(params.d.clone(), dij, params.pi.clone())
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], n: usize) -> Result<Array2<f64>, ModelError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ModelError::DimensionMismatch(format!(
            "expected a {n}x{n} matrix"
        )));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}
