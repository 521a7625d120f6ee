//! JSON run configuration.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::model::{macro_to_micro_with_tol, micro_to_macro, MicroParams, ModelError, ModelParams, DEFAULT_TOL_DB};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Validate,
    Solve,
    Simulate,
    BbgkyCheck,
    MeanfieldStudy,
    GridStudy,
    EntropyReport,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Validate => "validate",
            Study::Solve => "solve",
            Study::Simulate => "simulate",
            Study::BbgkyCheck => "bbgky-check",
            Study::MeanfieldStudy => "meanfield-study",
            Study::GridStudy => "grid-study",
            Study::EntropyReport => "entropy-report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Dij", default, skip_serializing_if = "Option::is_none")]
    pub dij: Option<Vec<Vec<f64>>>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "M_list", default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
}

/// `mean + Σ_r amplitudes[r] cos(2π modes[r] x + phases[r])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSpecies {
    pub mean: f64,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub modes: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
}

impl FourierSpecies {
    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.mean;
        for (r, (&a, &m)) in self.amplitudes.iter().zip(&self.modes).enumerate() {
            let ph = self.phases.as_ref().map_or(0.0, |p| p[r]);
            v += a * (2.0 * PI * m as f64 * x + ph).cos();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { values: Vec<f64> },
    Fourier { species: Vec<FourierSpecies> },
    /// Explicit node values, one row per species.
    Values { values: Vec<Vec<f64>> },
}

fn default_tol_db() -> f64 {
    DEFAULT_TOL_DB
}
fn default_tol_bbgky() -> f64 {
    1e-12
}
fn default_entropy_slack() -> f64 {
    1e-10
}
fn default_cfl() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol_db")]
    pub detailed_balance: f64,
    #[serde(default = "default_tol_bbgky")]
    pub bbgky: f64,
    #[serde(default = "default_entropy_slack")]
    pub entropy_slack: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            detailed_balance: default_tol_db(),
            bbgky: default_tol_bbgky(),
            entropy_slack: default_entropy_slack(),
            cfl: default_cfl(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<Study>,
    pub model: ModelBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Particle scale for `simulate` and `bbgky-check`.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<u32>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub scale_list: Option<Vec<u32>>,
    /// Marginal multi-indices for `bbgky-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Parses a configuration, reporting the location and field of the first
/// error, and checks its structure.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    cfg.check_structure()?;
    Ok(cfg)
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Array2<f64>, ConfigError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::Invalid(format!("{what} must be {n}x{n}")));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl RunConfig {
    pub fn n(&self) -> usize {
        self.model.d.len()
    }

    fn check_structure(&self) -> Result<(), ConfigError> {
        let n = self.n();
        if n == 0 {
            return Err(invalid("model.D is empty"));
        }
        if let Some(k) = self.model.n {
            if k != n {
                return Err(invalid(format!("model.n = {k} but D has {n} entries")));
            }
        }
        if self.model.pi.len() != n {
            return Err(invalid(format!("model.pi has {} entries, expected {n}", self.model.pi.len())));
        }
        match (&self.model.a, &self.model.dij) {
            (Some(_), Some(_)) => return Err(invalid("model must give exactly one of A and Dij, not both")),
            (None, None) => return Err(invalid("model must give one of A and Dij")),
            _ => {}
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("T must be positive and finite"));
            }
        }
        let tol = &self.tolerances;
        for (name, v) in [
            ("detailed_balance", tol.detailed_balance),
            ("bbgky", tol.bbgky),
            ("entropy_slack", tol.entropy_slack),
            ("cfl", tol.cfl),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerances.{name} must be a nonnegative number")));
            }
        }
        if let Some(InitialSpec::Fourier { species }) = &self.initial {
            if species.len() != n {
                return Err(invalid(format!("initial.species has {} entries, expected {n}", species.len())));
            }
            for (i, s) in species.iter().enumerate() {
                if s.amplitudes.len() != s.modes.len()
                    || s.phases.as_ref().is_some_and(|p| p.len() != s.modes.len())
                {
                    return Err(invalid(format!("initial.species[{i}]: amplitude, mode and phase lists differ in length")));
                }
            }
        }
        if let Some(InitialSpec::Constant { values }) = &self.initial {
            if values.len() != n {
                return Err(invalid(format!("initial.values has {} entries, expected {n}", values.len())));
            }
        }
        if let Some(InitialSpec::Values { values }) = &self.initial {
            if values.len() != n {
                return Err(invalid(format!("initial.values has {} rows, expected {n}", values.len())));
            }
        }
        Ok(())
    }

    /// Macroscopic parameters; `Dij` is converted with `A_ij = D_ij π_j`.
    pub fn macro_params(&self) -> Result<ModelParams, ConfigError> {
        let n = self.n();
        let tol = self.tolerances.detailed_balance;
        match (&self.model.a, &self.model.dij) {
            (Some(a), _) => Ok(ModelParams::new(self.model.d.clone(), matrix(a, n, "A")?, self.model.pi.clone(), tol)?),
            (_, Some(_)) => {
                let p = micro_to_macro(&self.micro_params()?);
                let report = p.validate(tol);
                if !report.is_valid() {
                    return Err(ModelError::Invalid(report).into());
                }
                Ok(p)
            }
            _ => unreachable!("checked by check_structure"),
        }
    }

    /// Microscopic rates; `A` is converted with `D_ij = A_ij / π_j` after the
    /// detailed-balance check.
    pub fn micro_params(&self) -> Result<MicroParams, ConfigError> {
        let n = self.n();
        match (&self.model.a, &self.model.dij) {
            (_, Some(dij)) => Ok(MicroParams::new(self.model.d.clone(), matrix(dij, n, "Dij")?, self.model.pi.clone())?),
            (Some(a), _) => {
                let p = ModelParams::new_unchecked(self.model.d.clone(), matrix(a, n, "A")?, self.model.pi.clone())?;
                Ok(macro_to_micro_with_tol(&p, self.tolerances.detailed_balance)?)
            }
            _ => unreachable!("checked by check_structure"),
        }
    }

    pub fn grid_m(&self) -> Result<usize, ConfigError> {
        self.grid
            .as_ref()
            .and_then(|g| g.m)
            .ok_or_else(|| invalid("grid.M is required for this study"))
    }

    pub fn grid_list(&self) -> Result<Vec<usize>, ConfigError> {
        self.grid
            .as_ref()
            .and_then(|g| g.m_list.clone())
            .ok_or_else(|| invalid("grid.M_list is required for this study"))
    }

    pub fn horizon(&self) -> Result<f64, ConfigError> {
        self.t_end.ok_or_else(|| invalid("T is required for this study"))
    }

    pub fn initial(&self) -> Result<&InitialSpec, ConfigError> {
        self.initial.as_ref().ok_or_else(|| invalid("initial data is required for this study"))
    }
}

impl InitialSpec {
    /// Closed-form evaluation `f(i, x)`, unavailable for node values.
    pub fn closed_form(&self) -> Option<Box<dyn Fn(usize, f64) -> f64 + Sync + '_>> {
        match self {
            InitialSpec::Constant { values } => Some(Box::new(move |i, _| values[i])),
            InitialSpec::Fourier { species } => Some(Box::new(move |i, x| species[i].eval(x))),
            InitialSpec::Values { .. } => None,
        }
    }

    fn check_shape(&self, n: usize) -> Result<(), ConfigError> {
        match self {
            InitialSpec::Constant { values } if values.len() != n => {
                Err(invalid(format!("initial.values has {} entries for {n} species", values.len())))
            }
            InitialSpec::Fourier { species } => {
                if species.len() != n {
                    return Err(invalid(format!("initial.species has {} entries for {n} species", species.len())));
                }
                for (i, sp) in species.iter().enumerate() {
                    let r = sp.amplitudes.len();
                    if sp.modes.len() != r || sp.phases.as_ref().is_some_and(|p| p.len() != r) {
                        return Err(invalid(format!(
                            "species {}: amplitudes, modes and phases must have equal lengths",
                            i + 1
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Node values on `grid` for `n` species.
    pub fn nodes(&self, grid: Grid, n: usize) -> Result<Array2<f64>, ConfigError> {
        self.check_shape(n)?;
        match self {
            InitialSpec::Values { values } => {
                if values.len() != n || values.iter().any(|r| r.len() != grid.m()) {
                    return Err(invalid(format!("initial.values must be {n} rows of {} node values", grid.m())));
                }
                Ok(Array2::from_shape_fn((n, grid.m()), |(i, k)| values[i][k]))
            }
            _ => {
                let f = self.closed_form().expect("closed form");
                Ok(Array2::from_shape_fn((n, grid.m()), |(i, k)| f(i, grid.x(k))))
            }
        }
    }

    /// Strict positivity: node values are checked directly, closed forms at
    /// `16 M` uniformly spaced points (which include the nodes).
    pub fn check_positive(&self, m: usize, n: usize) -> Result<(), ConfigError> {
        self.check_shape(n)?;
        let bad = |i: usize, x: f64, v: f64| {
            invalid(format!("initial data of species {} is not strictly positive ({v} at x = {x})", i + 1))
        };
        match self {
            InitialSpec::Values { values } => {
                for (i, row) in values.iter().enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        if !(v > 0.0 && v.is_finite()) {
                            return Err(bad(i, k as f64 / row.len() as f64, v));
                        }
                    }
                }
                Ok(())
            }
            _ => {
                let f = self.closed_form().expect("closed form");
                let points = 16 * m;
                for i in 0..n {
                    for s in 0..points {
                        let x = s as f64 / points as f64;
                        let v = f(i, x);
                        if !(v > 0.0 && v.is_finite()) {
                            return Err(bad(i, x, v));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}
