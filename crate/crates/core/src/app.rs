//! Study orchestration behind the `sktk` binary.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, InitialSpec, RunConfig, Study};
use crate::convergence::{refinement_study, ConvergenceError, Monitors, TestFunction, MIN_SAMPLES};
use crate::grid::Grid;
use crate::master::{dissipation, solve, uniform_times, DiscreteState, StepPolicy, Trajectory};
use crate::meanfield::{chaos_study, ssa_trials, ChaosSetup, MeanFieldError};
use crate::model::ModelError;
use crate::output::{fmt_f64, species_columns, write_snapshots, write_table, CsvError};
use crate::particles::labeled::{bbgky_check, build_generator, symmetrize, LabeledStateSpace, DEFAULT_ENUM_CAP};
use crate::particles::{average_empirical_marginal, ParticleError};

#[derive(Debug, Error)]
pub enum RunError {
    /// Bad configuration, invalid model or initial data.
    #[error("{0}")]
    Validation(String),
    /// A solver or check failed while the study ran.
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) | RunError::Io(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Validation(e.to_string())
    }
}

impl From<CsvError> for RunError {
    fn from(e: CsvError) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

fn numerical(study: Study, e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(format!("{}: {e}", study.name()))
}

fn particle_error(study: Study, e: ParticleError) -> RunError {
    match e {
        ParticleError::CapExceeded { .. } | ParticleError::InvalidConfig(_) | ParticleError::BadMultiIndex(_) => {
            RunError::Validation(format!("{}: {e}", study.name()))
        }
        other => numerical(study, other),
    }
}

fn meanfield_error(study: Study, e: MeanFieldError) -> RunError {
    match e {
        MeanFieldError::InvalidArgument(_) | MeanFieldError::NotADistribution { .. } => {
            RunError::Validation(format!("{}: {e}", study.name()))
        }
        MeanFieldError::Particle(p) => particle_error(study, p),
        other => numerical(study, other),
    }
}

/// Files written and the summary of a finished study.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Sink<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(dir: &'a Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn table(&mut self, name: &str, header: Vec<String>, rows: &[Vec<String>]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_table(BufWriter::new(File::create(&path)?), &header, rows)?;
        self.files.push(path);
        Ok(())
    }

    fn snapshots(&mut self, name: &str, traj: &Trajectory) -> Result<(), RunError> {
        let path = self.dir.join(name);
        write_snapshots(BufWriter::new(File::create(&path)?), traj)?;
        self.files.push(path);
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Summary document shared by successful and failed runs.
pub fn summary(study: Study, cfg: &RunConfig, status: &str, metrics: Value) -> Value {
    json!({
        "study": study.name(),
        "status": status,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "metrics": metrics,
    })
}

pub fn write_summary(dir: &Path, value: &Value) -> Result<PathBuf, RunError> {
    fs::create_dir_all(dir)?;
    let path = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Runs `study` on `cfg`, writing CSV files and `summary.json` into `out`.
pub fn run(study: Study, cfg: &RunConfig, out: &Path) -> Result<RunOutput, RunError> {
    if let Some(s) = cfg.study {
        if s != study {
            return Err(RunError::Validation(format!(
                "config selects study `{}` but `{}` was requested",
                s.name(),
                study.name()
            )));
        }
    }
    let mut sink = Sink::new(out)?;
    let metrics = match study {
        Study::Validate => validate(cfg)?,
        Study::Solve => run_solve(cfg, &mut sink)?,
        Study::EntropyReport => entropy_report(cfg, &mut sink)?,
        Study::Simulate => simulate(cfg, &mut sink)?,
        Study::BbgkyCheck => bbgky(cfg, &mut sink)?,
        Study::MeanfieldStudy => meanfield_study(cfg, &mut sink)?,
        Study::GridStudy => grid_study(cfg, &mut sink)?,
    };
    let value = summary(study, cfg, "ok", metrics);
    let path = write_summary(out, &value)?;
    sink.files.push(path);
    Ok(RunOutput {
        files: sink.files,
        summary: value,
    })
}

fn validate(cfg: &RunConfig) -> Result<Value, RunError> {
    let params = match cfg.macro_params() {
        Ok(p) => p,
        Err(ConfigError::Model(ModelError::Invalid(report))) => {
            let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(RunError::Validation(format!("invalid model: {}", lines.join("; "))));
        }
        Err(e) => return Err(e.into()),
    };
    cfg.micro_params()?;
    Ok(json!({ "valid": true, "n": params.n() }))
}

fn policy(cfg: &RunConfig) -> StepPolicy {
    StepPolicy {
        cfl: cfg.tolerances.cfl,
        ..StepPolicy::default()
    }
}

fn initial_state(cfg: &RunConfig, grid: Grid) -> Result<DiscreteState, RunError> {
    let spec = cfg.initial()?;
    spec.check_positive(grid.m(), cfg.n())?;
    let u = spec.nodes(grid, cfg.n())?;
    DiscreteState::new(grid, u, 0.0).map_err(|e| RunError::Validation(e.to_string()))
}

fn solve_from_config(cfg: &RunConfig, study: Study) -> Result<Trajectory, RunError> {
    let params = cfg.macro_params()?;
    let grid = Grid::new(cfg.grid_m()?).map_err(|e| RunError::Validation(e.to_string()))?;
    let t_end = cfg.horizon()?;
    let u0 = initial_state(cfg, grid)?;
    let times = uniform_times(t_end, cfg.samples.unwrap_or(101).max(2));
    solve(&u0, &params, t_end, &policy(cfg), &times).map_err(|e| numerical(study, e))
}

fn run_solve(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let traj = solve_from_config(cfg, Study::Solve)?;
    sink.snapshots("snapshots.csv", &traj)?;
    let first = traj.snapshots[0].masses();
    let last = traj.snapshots.last().unwrap().masses();
    let drift = first.iter().zip(&last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(json!({
        "steps": traj.steps,
        "samples": traj.snapshots.len(),
        "final_masses": last,
        "max_mass_drift": drift,
    }))
}

fn entropy_report(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let study = Study::EntropyReport;
    let params = cfg.macro_params()?;
    let traj = solve_from_config(cfg, study)?;
    let n = traj.n();
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    let mut h_prev = f64::INFINITY;
    let mut monotone = true;
    let mut bound_holds = true;
    let masses0 = traj.snapshots[0].masses();
    let mut drift = 0.0f64;
    for s in &traj.snapshots {
        let d = dissipation(s, &params).map_err(|e| numerical(study, e))?;
        monotone &= d.entropy <= h_prev + cfg.tolerances.entropy_slack;
        bound_holds &= d.dissipation <= -d.sqrt_lower_bound + 1e-12 * d.dissipation.abs();
        h_prev = d.entropy;
        for (a, b) in d.masses.iter().zip(&masses0) {
            drift = drift.max((a - b).abs());
        }
        let mut row = vec![fmt_f64(s.time), fmt_f64(d.entropy), fmt_f64(d.dissipation), fmt_f64(d.sqrt_lower_bound)];
        row.extend(d.masses.iter().map(|&m| fmt_f64(m)));
        rows.push(row);
    }
    let mut cols = header(&["t", "H", "dissipation", "sqrt_lower_bound"]);
    cols.extend(species_columns("mass", n));
    sink.table("entropy.csv", cols, &rows)?;
    Ok(json!({
        "entropy_non_increasing": monotone,
        "dissipation_bound_holds": bound_holds,
        "max_mass_drift": drift,
        "final_entropy": h_prev,
    }))
}

/// Per-species probability laws from the initial data at the nodes.
fn initial_law(cfg: &RunConfig, grid: Grid) -> Result<Array2<f64>, RunError> {
    let spec: &InitialSpec = cfg.initial()?;
    spec.check_positive(grid.m(), cfg.n())?;
    let mut u = spec.nodes(grid, cfg.n())?;
    for mut row in u.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok(u)
}

fn simulate(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let study = Study::Simulate;
    let micro = cfg.micro_params()?;
    let grid = Grid::new(cfg.grid_m()?).map_err(|e| RunError::Validation(e.to_string()))?;
    let scale = cfg.scale.ok_or_else(|| RunError::Validation("N is required for simulate".into()))?;
    let t_end = cfg.horizon()?;
    let law = initial_law(cfg, grid)?;
    let times = uniform_times(t_end, cfg.samples.unwrap_or(11).max(2));
    let trials = cfg.trials.unwrap_or(1).max(1);
    let setup = ChaosSetup {
        micro: &micro,
        grid,
        u0: &law,
        n_values: &[scale],
        trials,
        t_end,
        samples: times.len(),
        seed: cfg.seed.unwrap_or(0),
    };
    let trajs = ssa_trials(&setup, scale, &times).map_err(|e| meanfield_error(study, e))?;
    let n = micro.n();
    let marginals: Vec<Vec<Vec<f64>>> = (0..n).map(|i| average_empirical_marginal(&trajs, i)).collect();
    let mut rows = Vec::new();
    for (s, &t) in times.iter().enumerate() {
        for k in 0..grid.m() {
            let mut row = vec![fmt_f64(t), k.to_string(), fmt_f64(grid.x(k))];
            row.extend((0..n).map(|i| fmt_f64(marginals[i][s][k])));
            rows.push(row);
        }
    }
    let mut cols = header(&["t", "k", "x"]);
    cols.extend(species_columns("u", n));
    sink.table("marginals.csv", cols, &rows)?;

    let first = &trajs[0];
    let mut rows = Vec::new();
    for (snap, &t) in first.snapshots.iter().zip(&first.times) {
        for k in 0..grid.m() {
            let mut row = vec![fmt_f64(t), k.to_string(), fmt_f64(grid.x(k))];
            row.extend((0..n).map(|i| snap[[i, k]].to_string()));
            rows.push(row);
        }
    }
    let mut cols = header(&["t", "k", "x"]);
    cols.extend(species_columns("c", n));
    sink.table("counts.csv", cols, &rows)?;
    let events: Vec<u64> = trajs.iter().map(|t| t.events).collect();
    Ok(json!({
        "trials": trials,
        "N": scale,
        "particles_per_species": crate::particles::species_counts(micro.pi(), scale),
        "events_trial_0": events[0],
        "mean_events": events.iter().sum::<u64>() as f64 / events.len() as f64,
    }))
}

fn bbgky(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let study = Study::BbgkyCheck;
    let micro = cfg.micro_params()?;
    let grid = Grid::new(cfg.grid_m()?).map_err(|e| RunError::Validation(e.to_string()))?;
    let scale = cfg.scale.ok_or_else(|| RunError::Validation("N is required for bbgky-check".into()))?;
    let space =
        LabeledStateSpace::new(grid, micro.pi(), scale, DEFAULT_ENUM_CAP).map_err(|e| particle_error(study, e))?;
    let counts = space.counts().to_vec();
    let n = counts.len();
    let marginals = match &cfg.marginals {
        Some(list) => list.clone(),
        None => (0..n)
            .filter(|&i| counts[i] > 0)
            .map(|i| {
                let mut p = vec![0; n];
                p[i] = 1;
                p
            })
            .collect(),
    };
    let q = build_generator(&space, &micro).map_err(|e| particle_error(study, e))?;
    let sym = q.symmetry_defect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let cases = cfg.trials.unwrap_or(10).max(1);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let raw: Vec<f64> = (0..space.size()).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let raw: Vec<f64> = raw.into_iter().map(|v| v / total).collect();
        let mu = symmetrize(&space, &raw).map_err(|e| particle_error(study, e))?;
        for p in &marginals {
            let r = bbgky_check(&space, &micro, &mu, p).map_err(|e| particle_error(study, e))?;
            worst = worst.max(r);
            let label = p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            rows.push(vec![case.to_string(), label, fmt_f64(r)]);
        }
    }
    sink.table("bbgky.csv", header(&["case", "p", "residual"]), &rows)?;
    if !(worst <= cfg.tolerances.bbgky) {
        return Err(numerical(
            study,
            format!("hierarchy residual {worst:e} exceeds tolerance {:e}", cfg.tolerances.bbgky),
        ));
    }
    Ok(json!({
        "states": space.size(),
        "particles_per_species": counts,
        "generator_symmetry_defect": sym,
        "max_residual": worst,
        "cases": cases,
    }))
}

fn meanfield_study(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let study = Study::MeanfieldStudy;
    let micro = cfg.micro_params()?;
    let grid = Grid::new(cfg.grid_m()?).map_err(|e| RunError::Validation(e.to_string()))?;
    let n_values = cfg
        .scale_list
        .clone()
        .ok_or_else(|| RunError::Validation("N_list is required for meanfield-study".into()))?;
    let law = initial_law(cfg, grid)?;
    let setup = ChaosSetup {
        micro: &micro,
        grid,
        u0: &law,
        n_values: &n_values,
        trials: cfg.trials.unwrap_or(64),
        t_end: cfg.horizon()?,
        samples: cfg.samples.unwrap_or(11),
        seed: cfg.seed.unwrap_or(0),
    };
    let report = chaos_study(&setup).map_err(|e| meanfield_error(study, e))?;
    let rows: Vec<Vec<String>> = report
        .n_values
        .iter()
        .zip(&report.distances)
        .map(|(&n, &d)| {
            let cov = report
                .covariance
                .iter()
                .find(|(m, _)| *m == n)
                .map_or(String::new(), |&(_, c)| fmt_f64(c));
            vec![n.to_string(), fmt_f64(d), cov]
        })
        .collect();
    sink.table("chaos.csv", header(&["N", "distance", "covariance_defect"]), &rows)?;
    Ok(json!({
        "trials": report.trials,
        "distance_slope": report.distance_slope,
        "covariance_slope": report.covariance_slope,
        "inversions": report.inversions(),
    }))
}

fn grid_study(cfg: &RunConfig, sink: &mut Sink<'_>) -> Result<Value, RunError> {
    let study = Study::GridStudy;
    let params = cfg.macro_params()?;
    let m_values = cfg.grid_list()?;
    let t_end = cfg.horizon()?;
    let spec = cfg.initial()?;
    let f = spec
        .closed_form()
        .ok_or_else(|| RunError::Validation("grid-study needs closed-form initial data".into()))?;
    spec.check_positive(m_values.iter().copied().max().unwrap_or(2), cfg.n())?;
    let phis = TestFunction::standard_family(t_end);
    let samples = cfg.samples.unwrap_or(MIN_SAMPLES + 1);
    let res = refinement_study(&params, &*f, &m_values, t_end, samples, &phis, &policy(cfg)).map_err(|e| match e {
        ConvergenceError::Solver { .. } => numerical(study, e),
        other => RunError::Validation(format!("{}: {other}", study.name())),
    })?;
    let mut cols = header(&["M", "h", "l2_difference", "gap", "gap_envelope"]);
    cols.extend(species_columns("residual", phis.len()));
    cols.extend(species_columns("residual_continuous", phis.len()));
    cols.extend(Monitors::NAMES.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = res
        .levels
        .iter()
        .enumerate()
        .map(|(idx, l)| {
            let mut row = vec![
                l.m.to_string(),
                fmt_f64(l.h()),
                res.l2_differences.get(idx).map_or(String::new(), |&d| fmt_f64(d)),
                fmt_f64(l.gap),
                fmt_f64(l.gap_envelope),
            ];
            row.extend(l.weak_residuals.iter().map(|&v| fmt_f64(v)));
            row.extend(l.weak_residuals_continuous.iter().map(|&v| fmt_f64(v)));
            row.extend(l.monitors.as_array().iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    sink.table("study.csv", cols, &rows)?;
    let multi = res.levels.len() >= 2;
    Ok(json!({
        "M_list": res.m_values(),
        "gap_slope": multi.then(|| res.gap_slope()),
        "gap_envelope_slope": multi.then(|| res.envelope_slope()),
        "residual_slopes": multi.then(|| res.residual_slopes()),
        "l2_order": (res.l2_differences.len() >= 2).then(|| res.l2_order()),
        "l2_decreasing": res.l2_decreasing(),
        "monitor_ratios": res.monitor_ratios(),
        "entropy_monotone": res.levels.iter().all(|l| l.monitors.entropy_monotone),
    }))
}
