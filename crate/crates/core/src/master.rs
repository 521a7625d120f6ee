//! The spatially discrete SKT system
//!
//! ```text
//! ∂_t u_i(x_k) = D_i Δ_h u_i + Δ_h(u_i Σ_j A_ij u_j)
//! ```
//!
//! on the periodic grid, integrated in PDE time with classical RK4 and a
//! state-dependent step. Steps that would produce a value at or below the
//! positivity floor are rejected and retried with half the step.
//!
//! The entropy `H^h(u) = Σ_i h Σ_k π_i [u log u − u + 1]` and its dissipation
//! are evaluated on demand for snapshots.

use ndarray::{Array2, ArrayView1, Axis};
use thiserror::Error;

use crate::grid::{laplacian_into, Grid};
use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("state has non-positive value {value} for species {species} at site {site}")]
    NonPositiveState { species: usize, site: usize, value: f64 },
    #[error("step failed at t = {time}: positivity lost after {halvings} halvings (last dt = {dt})")]
    StepFailure { time: f64, dt: f64, halvings: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `u[[i, k]] = u_i(x_k)` at PDE time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub grid: Grid,
    pub u: Array2<f64>,
    pub time: f64,
}

impl DiscreteState {
    pub fn new(grid: Grid, u: Array2<f64>, time: f64) -> Result<Self, SolverError> {
        if u.ncols() != grid.m() || u.nrows() == 0 {
            return Err(SolverError::DimensionMismatch(format!(
                "state is {}x{}, grid has {} sites",
                u.nrows(),
                u.ncols(),
                grid.m()
            )));
        }
        Ok(Self { grid, u, time })
    }

    /// Samples `f(i, x)` at the nodes.
    pub fn from_fn(grid: Grid, n: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let u = Array2::from_shape_fn((n, grid.m()), |(i, k)| f(i, grid.x(k)));
        Self { grid, u, time: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Per-species mass `h Σ_k u_i(x_k)`.
    pub fn masses(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.u.rows().into_iter().map(|r| h * r.sum()).collect()
    }

    pub fn check_positive(&self) -> Result<(), SolverError> {
        check_positive(&self.u)
    }

    fn check_params(&self, params: &ModelParams) -> Result<(), SolverError> {
        if params.n() != self.n() {
            return Err(SolverError::DimensionMismatch(format!(
                "state has {} species, parameters have {}",
                self.n(),
                params.n()
            )));
        }
        Ok(())
    }
}

fn check_positive(u: &Array2<f64>) -> Result<(), SolverError> {
    for ((i, k), &v) in u.indexed_iter() {
        if !(v > 0.0) {
            return Err(SolverError::NonPositiveState { species: i, site: k, value: v });
        }
    }
    Ok(())
}

/// Right-hand side of the discrete system.
pub fn rhs(state: &DiscreteState, params: &ModelParams) -> Result<Array2<f64>, SolverError> {
    state.check_params(params)?;
    let mut out = Array2::zeros(state.u.raw_dim());
    let mut scratch = Scratch::new(state.grid.m());
    rhs_into(&state.u, params, &mut out, &mut scratch);
    Ok(out)
}

struct Scratch {
    flux: Vec<f64>,
    lap: Vec<f64>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Self {
            flux: vec![0.0; m],
            lap: vec![0.0; m],
        }
    }
}

fn rhs_into(u: &Array2<f64>, params: &ModelParams, out: &mut Array2<f64>, s: &mut Scratch) {
    let (n, m) = u.dim();
    let a = params.a();
    let d = params.d();
    for i in 0..n {
        for k in 0..m {
            let mut coupling = 0.0;
            for j in 0..n {
                coupling += a[[i, j]] * u[[j, k]];
            }
            s.flux[k] = u[[i, k]] * (d[i] + coupling);
        }
        laplacian_into(&s.flux, &mut s.lap);
        out.row_mut(i)
            .iter_mut()
            .zip(&s.lap)
            .for_each(|(o, &v)| *o = v);
    }
}

/// Step-size control for [`step`] and [`solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    /// Safety factor on `h² / (2 max D + 2 max_i Σ_j A_ij max u)`.
    pub cfl: f64,
    /// Overrides the state-dependent step when set.
    pub fixed_dt: Option<f64>,
    /// Values at or below this reject the step.
    pub pos_floor: f64,
    pub max_halvings: u32,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            fixed_dt: None,
            pos_floor: 1e-300,
            max_halvings: 40,
        }
    }
}

impl StepPolicy {
    pub fn stable_dt(&self, state: &DiscreteState, params: &ModelParams) -> f64 {
        if let Some(dt) = self.fixed_dt {
            return dt;
        }
        let h = state.grid.h();
        let umax = state.u.iter().copied().fold(0.0, f64::max);
        let denom = 2.0 * params.max_d() + 2.0 * params.max_row_sum() * umax;
        if denom > 0.0 {
            self.cfl * h * h / denom
        } else {
            f64::INFINITY
        }
    }
}

/// Integrator with reusable stage buffers.
struct Rk4 {
    k1: Array2<f64>,
    k2: Array2<f64>,
    k3: Array2<f64>,
    k4: Array2<f64>,
    tmp: Array2<f64>,
    scratch: Scratch,
}

impl Rk4 {
    fn new(n: usize, m: usize) -> Self {
        Self {
            k1: Array2::zeros((n, m)),
            k2: Array2::zeros((n, m)),
            k3: Array2::zeros((n, m)),
            k4: Array2::zeros((n, m)),
            tmp: Array2::zeros((n, m)),
            scratch: Scratch::new(m),
        }
    }

    fn advance(&mut self, u: &Array2<f64>, params: &ModelParams, dt: f64, out: &mut Array2<f64>) {
        rhs_into(u, params, &mut self.k1, &mut self.scratch);
        axpy_into(&mut self.tmp, u, 0.5 * dt, &self.k1);
        rhs_into(&self.tmp, params, &mut self.k2, &mut self.scratch);
        axpy_into(&mut self.tmp, u, 0.5 * dt, &self.k2);
        rhs_into(&self.tmp, params, &mut self.k3, &mut self.scratch);
        axpy_into(&mut self.tmp, u, dt, &self.k3);
        rhs_into(&self.tmp, params, &mut self.k4, &mut self.scratch);
        let c = dt / 6.0;
        ndarray::Zip::from(&mut *out)
            .and(u)
            .and(&self.k1)
            .and(&self.k2)
            .and(&self.k3)
            .for_each(|o, &x, &a, &b, &d| *o = x + c * (a + 2.0 * b + 2.0 * d));
        ndarray::Zip::from(out).and(&self.k4).for_each(|o, &k| *o += c * k);
    }

    /// Advances with rejection; returns the step actually taken.
    fn advance_positive(
        &mut self,
        u: &Array2<f64>,
        params: &ModelParams,
        dt: f64,
        policy: &StepPolicy,
        time: f64,
        out: &mut Array2<f64>,
    ) -> Result<f64, SolverError> {
        let mut dt = dt;
        let mut halvings = 0;
        loop {
            self.advance(u, params, dt, out);
            if out.iter().all(|&v| v > policy.pos_floor && v.is_finite()) {
                return Ok(dt);
            }
            if halvings == policy.max_halvings {
                return Err(SolverError::StepFailure { time, dt, halvings });
            }
            halvings += 1;
            dt *= 0.5;
        }
    }
}

fn axpy_into(out: &mut Array2<f64>, x: &Array2<f64>, a: f64, y: &Array2<f64>) {
    ndarray::Zip::from(out).and(x).and(y).for_each(|o, &x, &y| *o = x + a * y);
}

/// One RK4 step of size `dt` under the default policy (see [`step_with`]).
pub fn step(state: &DiscreteState, params: &ModelParams, dt: f64) -> Result<DiscreteState, SolverError> {
    step_with(state, params, dt, &StepPolicy::default())
}

/// One RK4 step. If any value lands at or below `policy.pos_floor` the step
/// is retried at half size, up to `policy.max_halvings` times; the returned
/// state's `time` reflects the step actually taken.
pub fn step_with(
    state: &DiscreteState,
    params: &ModelParams,
    dt: f64,
    policy: &StepPolicy,
) -> Result<DiscreteState, SolverError> {
    state.check_params(params)?;
    state.check_positive()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SolverError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let (n, m) = state.u.dim();
    let mut rk = Rk4::new(n, m);
    let mut out = Array2::zeros((n, m));
    let taken = rk.advance_positive(&state.u, params, dt, policy, state.time, &mut out)?;
    Ok(DiscreteState {
        grid: state.grid,
        u: out,
        time: state.time + taken,
    })
}

/// Snapshots of a solve at the requested sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub snapshots: Vec<DiscreteState>,
    /// Number of accepted RK4 steps.
    pub steps: u64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn n(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.n())
    }
}

/// `count` uniformly spaced times `0, T/(count−1), …, T`.
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..count)
            .map(|j| t_end * j as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Integrates from `u0` to `t_end`, recording a snapshot at every entry of
/// `sample_times` (ascending, within `[u0.time, t_end]`).
pub fn solve(
    u0: &DiscreteState,
    params: &ModelParams,
    t_end: f64,
    policy: &StepPolicy,
    sample_times: &[f64],
) -> Result<Trajectory, SolverError> {
    u0.check_params(params)?;
    u0.check_positive()?;
    if !(t_end > u0.time) || !t_end.is_finite() {
        return Err(SolverError::InvalidArgument(format!(
            "horizon {t_end} must exceed the start time {}",
            u0.time
        )));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0])
        || sample_times.iter().any(|&t| t < u0.time || t > t_end * (1.0 + 1e-12))
    {
        return Err(SolverError::InvalidArgument(
            "sample times must be ascending and lie within the horizon".into(),
        ));
    }
    let (n, m) = u0.u.dim();
    let mut rk = Rk4::new(n, m);
    let mut cur = u0.clone();
    let mut next = Array2::zeros((n, m));
    let mut snapshots = Vec::with_capacity(sample_times.len());
    let mut steps = 0u64;
    let eps = 1e-13 * t_end.abs().max(1.0);
    for &target in sample_times {
        while target - cur.time > eps {
            let dt = policy.stable_dt(&cur, params).min(target - cur.time);
            let taken = rk.advance_positive(&cur.u, params, dt, policy, cur.time, &mut next)?;
            std::mem::swap(&mut cur.u, &mut next);
            cur.time = if taken == target - cur.time { target } else { cur.time + taken };
            steps += 1;
        }
        let mut snap = cur.clone();
        snap.time = target;
        snapshots.push(snap);
    }
    Ok(Trajectory {
        grid: u0.grid,
        snapshots,
        steps,
    })
}

/// `v log v − v + 1`. Near `v = 1` the direct form cancels down to the
/// roundoff of `v log v`, so a short series in `e = v − 1` is used there.
pub fn entropy_density(v: f64) -> f64 {
    let e = v - 1.0;
    if e.abs() < 1e-3 {
        e * e * (0.5 + e * (-1.0 / 6.0 + e * (1.0 / 12.0 + e * (-1.0 / 20.0 + e / 30.0))))
    } else {
        v * v.ln() - e
    }
}

/// `H^h(u) = Σ_i h Σ_k π_i [u_i log u_i − u_i + 1]` (natural log).
pub fn entropy(state: &DiscreteState, params: &ModelParams) -> Result<f64, SolverError> {
    state.check_params(params)?;
    state.check_positive()?;
    let h = state.grid.h();
    let pi = params.pi();
    Ok(state
        .u
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| h * pi[i] * row.iter().map(|&v| entropy_density(v)).sum::<f64>())
        .sum())
}

/// `dH^h/dt = Σ_i h π_i Σ_k (∂_t u_i)(x_k) log u_i(x_k)`, evaluated directly
/// from the right-hand side. Independent of the gradient form used by
/// [`dissipation`].
pub fn entropy_rate(state: &DiscreteState, params: &ModelParams) -> Result<f64, SolverError> {
    state.check_positive()?;
    let r = rhs(state, params)?;
    let h = state.grid.h();
    let pi = params.pi();
    let mut s = 0.0;
    for i in 0..state.n() {
        for k in 0..state.grid.m() {
            s += h * pi[i] * r[[i, k]] * state.u[[i, k]].ln();
        }
    }
    Ok(s)
}

/// Entropy, dissipation and the related monitored quantities of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyDiagnostics {
    pub entropy: f64,
    /// Analytic `dH^h/dt`, always `≤ 0`.
    pub dissipation: f64,
    /// `4h Σ D_i π_i |∇⁺√u_i|² + 2h Σ_ij ã_ij |∇⁺√(u_i u_j)|²`, with
    /// `ã_ij = π_i A_ij`; bounds `−dissipation` from below.
    pub sqrt_lower_bound: f64,
    /// Per species `h Σ_k |∇⁺_h u_i|²`.
    pub grad_l2: Vec<f64>,
    pub masses: Vec<f64>,
}

/// `log y − log x` without the cancellation of the direct difference.
fn log_ratio(x: f64, y: f64) -> f64 {
    let r = (y - x) / x;
    if r.abs() < 0.5 {
        r.ln_1p()
    } else {
        y.ln() - x.ln()
    }
}

fn forward_pairs(row: ArrayView1<'_, f64>) -> impl Iterator<Item = (f64, f64)> + '_ {
    let m = row.len();
    (0..m).map(move |k| (row[k], row[if k + 1 == m { 0 } else { k + 1 }]))
}

/// Dissipation in gradient form:
///
/// ```text
/// −h Σ_i D_i π_i Σ_k ∇⁺(log u_i) ∇⁺u_i − (h/2) Σ_ij ã_ij Σ_k ∇⁺(log u_i u_j) ∇⁺(u_i u_j)
/// ```
///
/// together with the square-root lower bound obtained from
/// `(x − y)(log x − log y) ≥ 4 (√x − √y)²`.
pub fn dissipation(state: &DiscreteState, params: &ModelParams) -> Result<EntropyDiagnostics, SolverError> {
    state.check_params(params)?;
    state.check_positive()?;
    let entropy = entropy(state, params)?;
    let h = state.grid.h();
    let inv_h2 = 1.0 / (h * h);
    let (n, m) = state.u.dim();
    let pi = params.pi();
    let d = params.d();
    let a = params.a();

    let mut diss = 0.0;
    let mut bound = 0.0;
    let mut grad_l2 = Vec::with_capacity(n);
    for i in 0..n {
        let row = state.u.row(i);
        let mut g = 0.0;
        let mut lin = 0.0;
        let mut lin_sqrt = 0.0;
        for (x, y) in forward_pairs(row) {
            let dy = y - x;
            g += dy * dy;
            lin += log_ratio(x, y) * dy;
            lin_sqrt += (dy / (y.sqrt() + x.sqrt())).powi(2);
        }
        grad_l2.push(h * g * inv_h2);
        diss -= h * d[i] * pi[i] * lin * inv_h2;
        bound += 4.0 * h * d[i] * pi[i] * lin_sqrt * inv_h2;
    }
    let mut prod = vec![0.0; m];
    for i in 0..n {
        for j in 0..n {
            let at = pi[i] * a[[i, j]];
            if at == 0.0 {
                continue;
            }
            let (ui, uj) = (state.u.row(i), state.u.row(j));
            for k in 0..m {
                prod[k] = ui[k] * uj[k];
            }
            let mut quad = 0.0;
            let mut quad_sqrt = 0.0;
            for k in 0..m {
                let kp = if k + 1 == m { 0 } else { k + 1 };
                // product rule keeps the difference exact up to one rounding
                let dp = ui[kp] * (uj[kp] - uj[k]) + uj[k] * (ui[kp] - ui[k]);
                let dlog = log_ratio(ui[k], ui[kp]) + log_ratio(uj[k], uj[kp]);
                quad += dlog * dp;
                quad_sqrt += (dp / (prod[kp].sqrt() + prod[k].sqrt())).powi(2);
            }
            diss -= 0.5 * h * at * quad * inv_h2;
            bound += 2.0 * h * at * quad_sqrt * inv_h2;
        }
    }
    Ok(EntropyDiagnostics {
        entropy,
        dissipation: diss,
        sqrt_lower_bound: bound,
        grad_l2,
        masses: state.masses(),
    })
}
