//! Grid refinement toward the continuum system.
//!
//! No closed-form solution of the nonlinear system is available, so a
//! refinement run is judged by the Cauchy behaviour of the interpolants, by
//! the residual of the weak formulation against smooth test functions, and by
//! monitoring the a-priori quantities that have to stay bounded as `h → 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{cell_abs_power_integral, Grid};
use crate::master::{dissipation, entropy, rhs, solve, uniform_times, DiscreteState, SolverError, StepPolicy, Trajectory};
use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("weak residual needs at least {needed} samples starting at t = 0, got {got}")]
    InsufficientSampling { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solve on M = {m} failed: {source}")]
    Solver { m: usize, source: SolverError },
}

/// Minimum number of time samples for the weak residual.
pub const MIN_SAMPLES: usize = 200;

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Trapezoid rule on (possibly nonuniform) samples.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

// 5-point Gauss-Legendre on [0, 1]
const GAUSS_X: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332,
];
const GAUSS_W: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

/// `φ(t, x) = ψ(t) cos(2π m x + θ)` with `ψ(t) = (1 − t/τ)³` for `t < τ`
/// and zero afterwards, which is `C²` in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub mode: u32,
    pub phase: f64,
    /// End of the time support `τ`.
    pub cutoff: f64,
}

impl TestFunction {
    pub fn new(mode: u32, phase: f64, cutoff: f64) -> Self {
        Self { mode, phase, cutoff }
    }

    /// Three test functions with support inside `[0, T)`.
    pub fn standard_family(t_end: f64) -> Vec<Self> {
        vec![
            Self::new(1, 0.0, 0.8 * t_end),
            Self::new(2, 0.3, 0.6 * t_end),
            Self::new(3, 1.1, 0.9 * t_end),
        ]
    }

    fn psi(&self, t: f64) -> f64 {
        if t >= self.cutoff {
            0.0
        } else {
            (1.0 - t / self.cutoff).powi(3)
        }
    }

    fn dpsi(&self, t: f64) -> f64 {
        if t >= self.cutoff {
            0.0
        } else {
            -3.0 / self.cutoff * (1.0 - t / self.cutoff).powi(2)
        }
    }

    fn chi(&self, x: f64) -> f64 {
        (2.0 * PI * self.mode as f64 * x + self.phase).cos()
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.psi(t) * self.chi(x)
    }

    pub fn time_derivative(&self, t: f64, x: f64) -> f64 {
        self.dpsi(t) * self.chi(x)
    }

    pub fn laplacian(&self, t: f64, x: f64) -> f64 {
        let k = 2.0 * PI * self.mode as f64;
        -k * k * self.value(t, x)
    }

    /// `(φ(t, x+h) + φ(t, x−h) − 2φ(t, x)) / h²` at any real `x`.
    pub fn discrete_laplacian(&self, t: f64, x: f64, h: f64) -> f64 {
        self.psi(t) * (self.chi(x + h) + self.chi(x - h) - 2.0 * self.chi(x)) / (h * h)
    }
}

/// Which second derivative of the test function enters the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    /// `Δ_h φ`, as in the weak formulation of the discrete system.
    Discrete,
    /// `Δ φ`, as in the weak formulation of the limit.
    Continuous,
}

fn check_sampling(traj: &Trajectory) -> Result<(), ConvergenceError> {
    let got = traj.snapshots.len();
    if got < MIN_SAMPLES || traj.snapshots[0].time != 0.0 {
        return Err(ConvergenceError::InsufficientSampling {
            needed: MIN_SAMPLES,
            got,
        });
    }
    Ok(())
}

/// Per species `i`, the absolute value of
///
/// ```text
/// −∫ ũ_i(0) φ(0) − ∫∫ ũ_i ∂_t φ − ∫∫ [D_i ũ_i + Σ_j A_ij ũ_i ũ_j] Δ_h φ
/// ```
///
/// with 5-point Gauss per cell in space and the trapezoid rule over the
/// trajectory samples in time.
pub fn weak_residuals(
    traj: &Trajectory,
    params: &ModelParams,
    phi: &TestFunction,
    kind: LaplacianKind,
) -> Result<Vec<f64>, ConvergenceError> {
    check_sampling(traj)?;
    let n = traj.n();
    if params.n() != n {
        return Err(ConvergenceError::InvalidArgument("species count of trajectory and parameters differ".into()));
    }
    let grid = traj.grid;
    let (m, h) = (grid.m(), grid.h());
    let times = traj.times();
    let mut integrands = vec![vec![0.0; times.len()]; n];
    let mut initial = vec![0.0; n];
    let mut dt_phi = vec![0.0; 5 * m];
    let mut lap_phi = vec![0.0; 5 * m];
    let mut phi0 = vec![0.0; 5 * m];
    for (s, snap) in traj.snapshots.iter().enumerate() {
        let t = snap.time;
        for k in 0..m {
            for (g, &gx) in GAUSS_X.iter().enumerate() {
                let x = grid.x(k) + gx * h;
                dt_phi[5 * k + g] = phi.time_derivative(t, x);
                lap_phi[5 * k + g] = match kind {
                    LaplacianKind::Discrete => phi.discrete_laplacian(t, x, h),
                    LaplacianKind::Continuous => phi.laplacian(t, x),
                };
                if s == 0 {
                    phi0[5 * k + g] = phi.value(t, x);
                }
            }
        }
        for i in 0..n {
            let mut acc = 0.0;
            let mut init = 0.0;
            for k in 0..m {
                let kn = grid.next(k);
                for (g, (&gx, &gw)) in GAUSS_X.iter().zip(&GAUSS_W).enumerate() {
                    let interp = |j: usize| snap.u[[j, k]] + gx * (snap.u[[j, kn]] - snap.u[[j, k]]);
                    let ui = interp(i);
                    let mut flux = params.d()[i] * ui;
                    for j in 0..n {
                        let a = params.a()[[i, j]];
                        if a != 0.0 {
                            flux += a * ui * interp(j);
                        }
                    }
                    let w = gw * h;
                    acc += w * (ui * dt_phi[5 * k + g] + flux * lap_phi[5 * k + g]);
                    if s == 0 {
                        init += w * ui * phi0[5 * k + g];
                    }
                }
            }
            integrands[i][s] = acc;
            if s == 0 {
                initial[i] = init;
            }
        }
    }
    Ok((0..n)
        .map(|i| (-initial[i] - trapezoid(&times, &integrands[i])).abs())
        .collect())
}

/// Largest per-species weak residual with `Δ_h φ`.
pub fn weak_residual(traj: &Trajectory, params: &ModelParams, phi: &TestFunction) -> Result<f64, ConvergenceError> {
    Ok(weak_residuals(traj, params, phi, LaplacianKind::Discrete)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `∫₀ᵀ ∫ |[u_i u_j]~ − ũ_i ũ_j| dx dt`.
///
/// On a cell the difference is `α(1−α)(Δu_i)(Δu_j)` with `Δ` the jump across
/// the cell, whose integral is `(h/6)|Δu_i Δu_j|`.
pub fn product_interpolant_gap(traj: &Trajectory, i: usize, j: usize) -> f64 {
    let h = traj.grid.h();
    let values: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| {
            let (ui, uj) = (s.u.row(i), s.u.row(j));
            let m = ui.len();
            (0..m)
                .map(|k| {
                    let kn = if k + 1 == m { 0 } else { k + 1 };
                    ((ui[kn] - ui[k]) * (uj[kn] - uj[k])).abs()
                })
                .sum::<f64>()
                * h
                / 6.0
        })
        .collect();
    trapezoid(&traj.times(), &values)
}

/// The cellwise bound `(1/6) ∫₀ᵀ Σ_k h (|u_i(k)| + |u_i(k+1)|) |u_j(k+1) − u_j(k)| dt`
/// that dominates [`product_interpolant_gap`].
pub fn product_interpolant_envelope(traj: &Trajectory, i: usize, j: usize) -> f64 {
    let h = traj.grid.h();
    let values: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| {
            let (ui, uj) = (s.u.row(i), s.u.row(j));
            let m = ui.len();
            (0..m)
                .map(|k| {
                    let kn = if k + 1 == m { 0 } else { k + 1 };
                    (ui[k].abs() + ui[kn].abs()) * (uj[kn] - uj[k]).abs()
                })
                .sum::<f64>()
                * h
                / 6.0
        })
        .collect();
    trapezoid(&traj.times(), &values)
}

/// Quantities that the a-priori estimates keep bounded in `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    /// `Σ_i ∫₀ᵀ h Σ_k |∇⁺_h u_i|² dt`.
    pub gradient_integral: f64,
    /// `Σ_i ∫₀ᵀ ∫ |ũ_i|⁴ dx dt`.
    pub l4_integral: f64,
    /// `max_{i,φ} ∫₀ᵀ |d/dt ∫ ũ_i φ dx| dt / ‖φ‖_{W^{1,∞}}` over a fixed
    /// family of trigonometric `φ`.
    pub time_derivative: f64,
    /// `sup_t H^h`.
    pub entropy_sup: f64,
    /// `H^h` never increased by more than `1e-10` between samples.
    pub entropy_monotone: bool,
}

impl Monitors {
    pub fn as_array(&self) -> [f64; 4] {
        [self.gradient_integral, self.l4_integral, self.time_derivative, self.entropy_sup]
    }

    pub const NAMES: [&'static str; 4] = ["gradient_integral", "l4_integral", "time_derivative", "entropy_sup"];
}

/// `∫ T(x − x_k) φ(x) dx` for `φ = cos(2π m x + θ)`, by Gauss on both halves
/// of the hat.
fn hat_moments(grid: Grid, mode: u32, phase: f64) -> Vec<f64> {
    let h = grid.h();
    let f = |x: f64| (2.0 * PI * mode as f64 * x + phase).cos();
    (0..grid.m())
        .map(|k| {
            let xk = grid.x(k);
            GAUSS_X
                .iter()
                .zip(&GAUSS_W)
                .map(|(&s, &w)| w * h * (1.0 - s) * (f(xk + s * h) + f(xk - s * h)))
                .sum()
        })
        .collect()
}

/// Evaluates all [`Monitors`] on a trajectory.
pub fn monitors(traj: &Trajectory, params: &ModelParams) -> Result<Monitors, SolverError> {
    let times = traj.times();
    let grid = traj.grid;
    let n = traj.n();
    let family: Vec<(Vec<f64>, f64)> = (1..=3u32)
        .flat_map(|mode| [0.0, -0.5 * PI].map(|ph| (mode, ph)))
        .map(|(mode, ph)| (hat_moments(grid, mode, ph), 1.0 + 2.0 * PI * mode as f64))
        .collect();
    let mut grad = Vec::with_capacity(times.len());
    let mut l4 = Vec::with_capacity(times.len());
    let mut ent = Vec::with_capacity(times.len());
    let mut dual = vec![vec![Vec::with_capacity(times.len()); family.len()]; n];
    for snap in &traj.snapshots {
        let diag = dissipation(snap, params)?;
        grad.push(diag.grad_l2.iter().sum::<f64>());
        ent.push(diag.entropy);
        let h = grid.h();
        let mut q = 0.0;
        for row in snap.u.rows() {
            let m = row.len();
            for k in 0..m {
                q += h * cell_abs_power_integral(row[k], row[if k + 1 == m { 0 } else { k + 1 }], 4.0);
            }
        }
        l4.push(q);
        let r = rhs(snap, params)?;
        for i in 0..n {
            for (f, (w, _)) in family.iter().enumerate() {
                let v: f64 = r.row(i).iter().zip(w).map(|(a, b)| a * b).sum();
                dual[i][f].push(v.abs());
            }
        }
    }
    let mut time_derivative = 0.0f64;
    for per_species in &dual {
        for (vals, (_, norm)) in per_species.iter().zip(&family) {
            time_derivative = time_derivative.max(trapezoid(&times, vals) / norm);
        }
    }
    Ok(Monitors {
        gradient_integral: trapezoid(&times, &grad),
        l4_integral: trapezoid(&times, &l4),
        time_derivative,
        entropy_sup: ent.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        entropy_monotone: ent.windows(2).all(|w| w[1] <= w[0] + 1e-10),
    })
}

/// `‖ũ^{coarse} − ũ^{fine}‖_{L²([0,T]×T)}` for trajectories sampled at the
/// same times on nested grids. The difference is piecewise linear on the fine
/// grid, so each cell integrates exactly.
pub fn interpolant_l2_difference(coarse: &Trajectory, fine: &Trajectory) -> Result<f64, ConvergenceError> {
    let (mc, mf) = (coarse.grid.m(), fine.grid.m());
    if mf % mc != 0 || coarse.snapshots.len() != fine.snapshots.len() {
        return Err(ConvergenceError::InvalidArgument("trajectories are not nested or not aligned".into()));
    }
    let ratio = mf / mc;
    let h = fine.grid.h();
    let values: Vec<f64> = coarse
        .snapshots
        .iter()
        .zip(&fine.snapshots)
        .map(|(c, f)| {
            let mut acc = 0.0;
            let mut diff = vec![0.0; mf];
            for (cr, fr) in c.u.rows().into_iter().zip(f.u.rows()) {
                for (k, d) in diff.iter_mut().enumerate() {
                    let kc = k / ratio;
                    let s = (k % ratio) as f64 / ratio as f64;
                    let coarse_val = cr[kc] + s * (cr[(kc + 1) % mc] - cr[kc]);
                    *d = coarse_val - fr[k];
                }
                for k in 0..mf {
                    let (a, b) = (diff[k], diff[(k + 1) % mf]);
                    acc += h * (a * a + a * b + b * b) / 3.0;
                }
            }
            acc
        })
        .collect();
    Ok(trapezoid(&coarse.times(), &values).sqrt())
}

/// One grid of a refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyLevel {
    pub m: usize,
    pub trajectory: Trajectory,
    /// Per test function, largest species residual with `Δ_h φ`.
    pub weak_residuals: Vec<f64>,
    /// Same with `Δ φ`.
    pub weak_residuals_continuous: Vec<f64>,
    /// Largest [`product_interpolant_gap`] over species pairs.
    pub gap: f64,
    /// Largest [`product_interpolant_envelope`] over species pairs.
    pub gap_envelope: f64,
    pub monitors: Monitors,
}

impl StudyLevel {
    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }
}

/// Outcome of [`refinement_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub t_end: f64,
    pub levels: Vec<StudyLevel>,
    /// `‖ũ^{M_k} − ũ^{M_{k+1}}‖` for consecutive grids.
    pub l2_differences: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
}

impl RefinementStudy {
    pub fn m_values(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.m).collect()
    }

    fn hs(&self) -> Vec<f64> {
        self.levels.iter().map(StudyLevel::h).collect()
    }

    /// Observed order of the product-interpolant gap in `h`.
    pub fn gap_slope(&self) -> f64 {
        loglog_slope(&self.hs(), &self.levels.iter().map(|l| l.gap).collect::<Vec<_>>())
    }

    pub fn envelope_slope(&self) -> f64 {
        loglog_slope(&self.hs(), &self.levels.iter().map(|l| l.gap_envelope).collect::<Vec<_>>())
    }

    /// Observed order of the weak residual in `h`, per test function.
    pub fn residual_slopes(&self) -> Vec<f64> {
        (0..self.test_functions.len())
            .map(|f| loglog_slope(&self.hs(), &self.levels.iter().map(|l| l.weak_residuals[f]).collect::<Vec<_>>()))
            .collect()
    }

    /// Observed order of the successive differences, using the finer `h` of
    /// each pair.
    pub fn l2_order(&self) -> f64 {
        let hs: Vec<f64> = self.hs()[1..].to_vec();
        loglog_slope(&hs, &self.l2_differences)
    }

    pub fn l2_decreasing(&self) -> bool {
        self.l2_differences.windows(2).all(|w| w[1] < w[0])
    }

    /// max/min across grids of each monitor, in [`Monitors::NAMES`] order.
    pub fn monitor_ratios(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (q, o) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = self.levels.iter().map(|l| l.monitors.as_array()[q]).collect();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            *o = max / min;
        }
        out
    }
}

/// Solves the discrete system on every `M` from `u0` sampled at the nodes,
/// recording `samples` uniformly spaced snapshots on `[0, T]`, and evaluates
/// residuals, gaps, monitors and successive differences.
pub fn refinement_study(
    params: &ModelParams,
    u0: &(dyn Fn(usize, f64) -> f64 + Sync),
    m_values: &[usize],
    t_end: f64,
    samples: usize,
    phis: &[TestFunction],
    policy: &StepPolicy,
) -> Result<RefinementStudy, ConvergenceError> {
    if m_values.is_empty()
        || m_values.windows(2).any(|w| w[1] <= w[0])
        || m_values.iter().any(|m| !m.is_power_of_two() || *m < 2)
    {
        return Err(ConvergenceError::InvalidArgument(
            "grid sizes must be strictly increasing powers of two".into(),
        ));
    }
    if samples < MIN_SAMPLES {
        return Err(ConvergenceError::InsufficientSampling {
            needed: MIN_SAMPLES,
            got: samples,
        });
    }
    if phis.iter().any(|p| !(p.cutoff > 0.0 && p.cutoff < t_end)) {
        return Err(ConvergenceError::InvalidArgument("test function support must lie inside [0, T)".into()));
    }
    let times = uniform_times(t_end, samples);
    let n = params.n();
    let levels: Vec<StudyLevel> = m_values
        .par_iter()
        .map(|&m| {
            let wrap = |source| ConvergenceError::Solver { m, source };
            let grid = Grid::new(m).map_err(|e| ConvergenceError::InvalidArgument(e.to_string()))?;
            let start = DiscreteState::from_fn(grid, n, u0);
            let trajectory = solve(&start, params, t_end, policy, &times).map_err(wrap)?;
            let mut weak = Vec::with_capacity(phis.len());
            let mut weak_c = Vec::with_capacity(phis.len());
            for phi in phis {
                let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
                weak.push(max(weak_residuals(&trajectory, params, phi, LaplacianKind::Discrete)?));
                weak_c.push(max(weak_residuals(&trajectory, params, phi, LaplacianKind::Continuous)?));
            }
            let mut gap = 0.0f64;
            let mut gap_envelope = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    gap = gap.max(product_interpolant_gap(&trajectory, i, j));
                    gap_envelope = gap_envelope.max(product_interpolant_envelope(&trajectory, i, j));
                }
            }
            let monitors = monitors(&trajectory, params).map_err(wrap)?;
            Ok(StudyLevel {
                m,
                trajectory,
                weak_residuals: weak,
                weak_residuals_continuous: weak_c,
                gap,
                gap_envelope,
                monitors,
            })
        })
        .collect::<Result<_, ConvergenceError>>()?;
    let l2_differences = levels
        .windows(2)
        .map(|w| interpolant_l2_difference(&w[0].trajectory, &w[1].trajectory))
        .collect::<Result<_, _>>()?;
    Ok(RefinementStudy {
        t_end,
        levels,
        l2_differences,
        test_functions: phis.to_vec(),
    })
}

/// `H^h` along a trajectory.
pub fn entropy_series(traj: &Trajectory, params: &ModelParams) -> Result<Vec<f64>, SolverError> {
    traj.snapshots.iter().map(|s| entropy(s, params)).collect()
}
