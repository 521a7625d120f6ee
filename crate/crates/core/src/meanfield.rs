//! Mean-field limit of the particle model.
//!
//! As `N → ∞` the one-particle marginals `u_i` (probability vectors over
//! sites) solve, in the particle clock,
//!
//! ```text
//! d/dt u_i(k) = D_i Δ u_i(k) + Σ_j D_ij π_j Δ(u_i u_j)(k)
//! ```
//!
//! with `Δ` the three-point second difference without the `1/h²` factor.
//! Weights `π` are normalised before use, matching the particle counts.

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::convergence::loglog_slope;
use crate::grid::Grid;
use crate::master::uniform_times;
use crate::model::MicroParams;
use crate::particles::labeled::{
    build_generator, covariance_defect, evolve_mu_sampled, product_measure, LabeledStateSpace, DEFAULT_ENUM_CAP,
};
use crate::particles::ssa::{ssa_run_with, trial_rng};
use crate::particles::{average_empirical_marginal, species_counts, ParticleConfig, ParticleError, ParticleTrajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeanFieldError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("species {species} is not a probability vector: {reason}")]
    NotADistribution { species: usize, reason: String },
    #[error("step failed at particle time {time}: non-positive marginal")]
    StepFailure { time: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Particle(#[from] ParticleError),
}

/// One-particle laws `u[[i, k]]` at particle time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub grid: Grid,
    pub u: Array2<f64>,
    pub time: f64,
}

impl MeanFieldState {
    /// Checks that each row is a nonnegative vector summing to 1 (`1e-10`).
    pub fn new(grid: Grid, u: Array2<f64>, time: f64) -> Result<Self, MeanFieldError> {
        if u.ncols() != grid.m() || u.nrows() == 0 {
            return Err(MeanFieldError::DimensionMismatch(format!(
                "state is {}x{}, grid has {} sites",
                u.nrows(),
                u.ncols(),
                grid.m()
            )));
        }
        for (i, row) in u.rows().into_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(MeanFieldError::NotADistribution {
                    species: i,
                    reason: "negative or non-finite entry".into(),
                });
            }
            let s = row.sum();
            if (s - 1.0).abs() > 1e-10 {
                return Err(MeanFieldError::NotADistribution {
                    species: i,
                    reason: format!("sums to {s}"),
                });
            }
        }
        Ok(Self { grid, u, time })
    }

    pub fn uniform(grid: Grid, n: usize) -> Self {
        let m = grid.m();
        Self {
            grid,
            u: Array2::from_elem((n, m), 1.0 / m as f64),
            time: 0.0,
        }
    }

    /// Rows of `w` (nonnegative, not all zero) rescaled to sum to one.
    pub fn normalised(grid: Grid, w: &Array2<f64>) -> Result<Self, MeanFieldError> {
        let mut u = w.clone();
        for mut row in u.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        Self::new(grid, u, 0.0)
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }
}

fn check_species(state: &MeanFieldState, micro: &MicroParams) -> Result<(), MeanFieldError> {
    if micro.n() != state.n() {
        return Err(MeanFieldError::DimensionMismatch(format!(
            "state has {} species, rates have {}",
            state.n(),
            micro.n()
        )));
    }
    Ok(())
}

fn mf_rhs_into(u: &Array2<f64>, d: &[f64], b: &Array2<f64>, out: &mut Array2<f64>, flux: &mut [f64]) {
    let (n, m) = u.dim();
    for i in 0..n {
        for (k, f) in flux.iter_mut().enumerate() {
            let mut acc = d[i];
            for j in 0..n {
                acc += b[[i, j]] * u[[j, k]];
            }
            *f = u[[i, k]] * acc;
        }
        let mut row = out.row_mut(i);
        for k in 0..m {
            let l = flux[if k == 0 { m - 1 } else { k - 1 }];
            let r = flux[if k + 1 == m { 0 } else { k + 1 }];
            row[k] = r + l - 2.0 * flux[k];
        }
    }
}

/// `b[[i, j]] = D_ij π_j` with normalised `π`.
fn coupling(micro: &MicroParams) -> Array2<f64> {
    let pi = micro.normalised_pi();
    let n = micro.n();
    Array2::from_shape_fn((n, n), |(i, j)| micro.dij()[[i, j]] * pi[j])
}

/// Right-hand side of the mean-field equation in the particle clock.
pub fn mf_rhs(state: &MeanFieldState, micro: &MicroParams) -> Result<Array2<f64>, MeanFieldError> {
    check_species(state, micro)?;
    let m = state.grid.m();
    let mut out = Array2::zeros(state.u.dim());
    let mut flux = vec![0.0; m];
    mf_rhs_into(&state.u, micro.d(), &coupling(micro), &mut out, &mut flux);
    Ok(out)
}

/// `Σ_i π_i Σ_ℓ u_i(ℓ) log(u_i(ℓ) M)` with normalised `π`; the `N → ∞` limit
/// of `H̃(μ^N) / N` for product laws.
pub fn mf_entropy(state: &MeanFieldState, micro: &MicroParams) -> Result<f64, MeanFieldError> {
    check_species(state, micro)?;
    let m = state.grid.m() as f64;
    let pi = micro.normalised_pi();
    Ok(state
        .u
        .rows()
        .into_iter()
        .zip(&pi)
        .map(|(row, p)| p * row.iter().map(|&v| if v > 0.0 { v * (v * m).ln() } else { 0.0 }).sum::<f64>())
        .sum())
}

/// `(1/N) Σ_i ⌊π_i N⌋ Σ_ℓ u_i(ℓ) log(u_i(ℓ) M)`: the relative entropy of the
/// product law with one-particle factors `laws`, divided by `N`.
pub fn product_law_entropy(counts: &[usize], laws: &Array2<f64>, scale: u32) -> f64 {
    let m = laws.ncols() as f64;
    counts
        .iter()
        .zip(laws.rows())
        .map(|(&c, row)| c as f64 * row.iter().map(|&v| v * (v * m).ln()).sum::<f64>())
        .sum::<f64>()
        / scale as f64
}

/// Snapshots of a mean-field solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldTrajectory {
    pub grid: Grid,
    pub snapshots: Vec<MeanFieldState>,
}

impl MeanFieldTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

/// Largest stable particle-clock step `0.4 / (2 max D_i + 2 max_i Σ_j D_ij π_j)`.
pub fn mf_stable_dt(micro: &MicroParams) -> f64 {
    let b = coupling(micro);
    let max_d = micro.d().iter().copied().fold(0.0, f64::max);
    let max_row = b.rows().into_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let denom = 2.0 * max_d + 2.0 * max_row;
    if denom > 0.0 {
        0.4 / denom
    } else {
        f64::INFINITY
    }
}

/// RK4 in the particle clock from `u0` (strictly positive rows) to `t_end`,
/// recording the state at each ascending sample time.
pub fn mf_solve(
    u0: &MeanFieldState,
    micro: &MicroParams,
    t_end: f64,
    sample_times: &[f64],
) -> Result<MeanFieldTrajectory, MeanFieldError> {
    check_species(u0, micro)?;
    if let Some(((i, _), _)) = u0.u.indexed_iter().find(|(_, &v)| !(v > 0.0)) {
        return Err(MeanFieldError::NotADistribution {
            species: i,
            reason: "initial law must be strictly positive".into(),
        });
    }
    if !(t_end >= u0.time) || sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(MeanFieldError::InvalidArgument("sample times must be ascending within the horizon".into()));
    }
    let b = coupling(micro);
    let d = micro.d().to_vec();
    let m = u0.grid.m();
    let dim = u0.u.dim();
    let dt_max = mf_stable_dt(micro);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        Array2::zeros(dim),
        Array2::zeros(dim),
        Array2::zeros(dim),
        Array2::zeros(dim),
        Array2::zeros(dim),
    );
    let mut flux = vec![0.0; m];
    let mut u = u0.u.clone();
    let mut now = u0.time;
    let mut snapshots = Vec::with_capacity(sample_times.len());
    for &target in sample_times.iter().filter(|&&t| t <= t_end) {
        let span = target - now;
        if span > 0.0 {
            let steps = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                mf_rhs_into(&u, &d, &b, &mut k1, &mut flux);
                ndarray::Zip::from(&mut tmp).and(&u).and(&k1).for_each(|t, &x, &k| *t = x + 0.5 * dt * k);
                mf_rhs_into(&tmp, &d, &b, &mut k2, &mut flux);
                ndarray::Zip::from(&mut tmp).and(&u).and(&k2).for_each(|t, &x, &k| *t = x + 0.5 * dt * k);
                mf_rhs_into(&tmp, &d, &b, &mut k3, &mut flux);
                ndarray::Zip::from(&mut tmp).and(&u).and(&k3).for_each(|t, &x, &k| *t = x + dt * k);
                mf_rhs_into(&tmp, &d, &b, &mut k4, &mut flux);
                ndarray::Zip::from(&mut u)
                    .and(&k1)
                    .and(&k2)
                    .and(&k3)
                    .and(&k4)
                    .for_each(|x, &a, &b, &c, &e| *x += dt / 6.0 * (a + 2.0 * b + 2.0 * c + e));
                now += dt;
                if u.iter().any(|&v| !(v > 0.0)) {
                    return Err(MeanFieldError::StepFailure { time: now });
                }
            }
            now = target;
        }
        snapshots.push(MeanFieldState {
            grid: u0.grid,
            u: u.clone(),
            time: target,
        });
    }
    Ok(MeanFieldTrajectory {
        grid: u0.grid,
        snapshots,
    })
}

/// Outcome of [`chaos_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosReport {
    pub n_values: Vec<u32>,
    /// Per `N`: sup over sample times of the largest per-species L¹ distance
    /// between the trial-averaged empirical marginal and the mean-field law.
    pub distances: Vec<f64>,
    pub distance_slope: Option<f64>,
    /// `(N, defect)` for the `N` whose state space fits the oracle cap.
    pub covariance: Vec<(u32, f64)>,
    pub covariance_slope: Option<f64>,
    pub trials: usize,
}

impl ChaosReport {
    /// Adjacent pairs `(N_k, N_{k+1})` whose distance fails to decrease.
    pub fn inversions(&self) -> usize {
        self.distances.windows(2).filter(|w| w[1] >= w[0]).count()
    }
}

/// Parameters of a propagation-of-chaos study.
#[derive(Debug, Clone)]
pub struct ChaosSetup<'a> {
    pub micro: &'a MicroParams,
    pub grid: Grid,
    /// Initial one-particle laws, strictly positive rows summing to one.
    pub u0: &'a Array2<f64>,
    pub n_values: &'a [u32],
    pub trials: usize,
    pub t_end: f64,
    pub samples: usize,
    pub seed: u64,
}

fn check_n_values(micro: &MicroParams, n_values: &[u32]) -> Result<(), MeanFieldError> {
    if n_values.is_empty() || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeanFieldError::InvalidArgument("N values must be strictly increasing".into()));
    }
    for &n in n_values {
        if species_counts(micro.pi(), n).contains(&0) {
            return Err(MeanFieldError::InvalidArgument(format!(
                "N = {n} leaves some species without particles"
            )));
        }
    }
    Ok(())
}

/// Seed for the trials at scale `n`; trial `t` uses stream `t` of it.
pub fn scale_seed(seed: u64, n: u32) -> u64 {
    seed ^ (u64::from(n) << 32)
}

/// SSA trials at scale `n` from i.i.d. initial positions drawn from `u0`.
pub fn ssa_trials(setup: &ChaosSetup<'_>, n: u32, times: &[f64]) -> Result<Vec<ParticleTrajectory>, MeanFieldError> {
    let seed = scale_seed(setup.seed, n);
    (0..setup.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let cfg = ParticleConfig::sample_iid(setup.grid, setup.u0, n, setup.micro.pi(), &mut rng)?;
            Ok(ssa_run_with(&cfg, setup.micro, setup.t_end, &mut rng, times))
        })
        .collect()
}

/// Sup-time, max-species L¹ distance between averaged empirical marginals
/// and the mean-field trajectory sampled at the same times.
pub fn marginal_distance(trajs: &[ParticleTrajectory], mf: &MeanFieldTrajectory) -> f64 {
    let n = mf.snapshots.first().map_or(0, |s| s.n());
    let mut worst = 0.0f64;
    for i in 0..n {
        let emp = average_empirical_marginal(trajs, i);
        for (row, snap) in emp.iter().zip(&mf.snapshots) {
            let d: f64 = row.iter().zip(snap.u.row(i)).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(d);
        }
    }
    worst
}

/// Sup over `times` of the two-particle covariance defect of the exact law
/// started from the product of `u0`, or `None` when the state space exceeds
/// the oracle cap.
pub fn covariance_defect_curve(
    micro: &MicroParams,
    grid: Grid,
    u0: &Array2<f64>,
    n: u32,
    times: &[f64],
) -> Result<Option<f64>, MeanFieldError> {
    let space = match LabeledStateSpace::new(grid, micro.pi(), n, DEFAULT_ENUM_CAP) {
        Ok(s) => s,
        Err(ParticleError::CapExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let q = build_generator(&space, micro)?;
    let mu0 = product_measure(&space, u0)?;
    let mut worst = 0.0f64;
    for mu in evolve_mu_sampled(&space, &q, &mu0, times)? {
        worst = worst.max(covariance_defect(&space, &mu)?);
    }
    Ok(Some(worst))
}

/// Empirical-marginal distances per `N` and, where enumerable, the exact
/// covariance defect. Slopes are fitted in log-log coordinates.
pub fn chaos_study(setup: &ChaosSetup<'_>) -> Result<ChaosReport, MeanFieldError> {
    check_n_values(setup.micro, setup.n_values)?;
    if setup.trials == 0 || setup.samples < 2 || !(setup.t_end > 0.0) {
        return Err(MeanFieldError::InvalidArgument("need trials ≥ 1, samples ≥ 2, T > 0".into()));
    }
    let state0 = MeanFieldState::new(setup.grid, setup.u0.clone(), 0.0)?;
    let times = uniform_times(setup.t_end, setup.samples);
    let mf = mf_solve(&state0, setup.micro, setup.t_end, &times)?;
    let mut distances = Vec::with_capacity(setup.n_values.len());
    let mut covariance = Vec::new();
    for &n in setup.n_values {
        let trajs = ssa_trials(setup, n, &times)?;
        distances.push(marginal_distance(&trajs, &mf));
        if let Some(c) = covariance_defect_curve(setup.micro, setup.grid, setup.u0, n, &times)? {
            covariance.push((n, c));
        }
    }
    let xs: Vec<f64> = setup.n_values.iter().map(|&n| n as f64).collect();
    let distance_slope = (xs.len() >= 2).then(|| loglog_slope(&xs, &distances));
    let covariance_slope = (covariance.len() >= 2).then(|| {
        let (cx, cy): (Vec<f64>, Vec<f64>) = covariance.iter().map(|&(n, c)| (n as f64, c)).unzip();
        loglog_slope(&cx, &cy)
    });
    Ok(ChaosReport {
        n_values: setup.n_values.to_vec(),
        distances,
        distance_slope,
        covariance,
        covariance_slope,
        trials: setup.trials,
    })
}
