//! The reversible lattice particle model.
//!
//! Each species `i` has `⌊π_i N⌋` particles on the periodic grid. A particle
//! jumps to either neighbour at rate `D_i`; every pair of co-located
//! particles `(i, a) ≠ (j, b)` jumps together, by the same `±h`, at rate
//! `D_ij / N` per direction.
//!
//! Two representations are provided. [`ParticleConfig`] stores occupation
//! numbers and drives the exact event-driven simulator in [`ssa`]. The
//! labeled representation in [`labeled`] enumerates every configuration of
//! tiny systems and builds the generator explicitly; it is the oracle for the
//! reversibility, entropy and marginal hierarchy checks.

pub mod labeled;
pub mod ssa;

use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

use crate::grid::Grid;
pub use labeled::{
    bbgky_check, build_generator, covariance_defect, eq4_rhs, evolve_mu, evolve_mu_sampled, hierarchy_rhs, is_exchangeable,
    micro_entropy, product_measure, project_marginal, symmetrize, Generator, LabeledStateSpace, Layout, Marginal,
    DEFAULT_ENUM_CAP,
};
pub use ssa::{apply_event, event_rates, ssa_run, ssa_run_trial, Direction, EventClass, ParticleTrajectory, RateTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParticleError {
    #[error("state space of {size} states exceeds the enumeration cap {cap}")]
    CapExceeded { size: u128, cap: usize },
    #[error("multi-index {0:?} exceeds the particle counts")]
    BadMultiIndex(Vec<usize>),
    #[error("measure is not exchangeable within species (deviation {0:e})")]
    SymmetryViolation(f64),
    #[error("measure has a non-positive entry at state {0}")]
    NonPositiveMeasure(usize),
    #[error("invalid particle configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// `⌊π_i N⌋` for each species, with `π` normalised to sum to one.
///
/// A relative slack of `1e-9` absorbs rounding in `π_i N` (e.g. `N/3 · 3`),
/// so products that are integers in exact arithmetic floor to that integer.
pub fn species_counts(pi: &[f64], scale: u32) -> Vec<u32> {
    let total: f64 = pi.iter().sum();
    pi.iter()
        .map(|p| {
            let x = p / total * scale as f64;
            (x + 1e-9 * x.max(1.0)).floor() as u32
        })
        .collect()
}

/// Occupation numbers `c_i(k)` of a particle configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleConfig {
    grid: Grid,
    counts: Array2<u32>,
    scale: u32,
}

impl ParticleConfig {
    /// Checks that each row of `counts` sums to `⌊π_i N⌋`.
    pub fn new(grid: Grid, counts: Array2<u32>, scale: u32, pi: &[f64]) -> Result<Self, ParticleError> {
        if counts.ncols() != grid.m() || counts.nrows() != pi.len() {
            return Err(ParticleError::DimensionMismatch(format!(
                "counts are {}x{}, expected {}x{}",
                counts.nrows(),
                counts.ncols(),
                pi.len(),
                grid.m()
            )));
        }
        if scale == 0 {
            return Err(ParticleError::InvalidConfig("N must be positive".into()));
        }
        let expected = species_counts(pi, scale);
        for (i, row) in counts.rows().into_iter().enumerate() {
            let s: u32 = row.sum();
            if s != expected[i] {
                return Err(ParticleError::InvalidConfig(format!(
                    "species {} has {s} particles, expected floor(pi_i N) = {}",
                    i + 1,
                    expected[i]
                )));
            }
        }
        Ok(Self { grid, counts, scale })
    }

    /// Every particle at `site`.
    pub fn concentrated(grid: Grid, site: usize, scale: u32, pi: &[f64]) -> Result<Self, ParticleError> {
        let per = species_counts(pi, scale);
        let mut counts = Array2::zeros((pi.len(), grid.m()));
        for (i, &c) in per.iter().enumerate() {
            counts[[i, site % grid.m()]] = c;
        }
        Self::new(grid, counts, scale, pi)
    }

    /// Places each particle independently, species `i` drawn from row `i`
    /// of `law` (a probability vector over sites).
    pub fn sample_iid<R: Rng + ?Sized>(
        grid: Grid,
        law: &Array2<f64>,
        scale: u32,
        pi: &[f64],
        rng: &mut R,
    ) -> Result<Self, ParticleError> {
        if law.dim() != (pi.len(), grid.m()) {
            return Err(ParticleError::DimensionMismatch("initial law shape".into()));
        }
        let per = species_counts(pi, scale);
        let mut counts = Array2::zeros((pi.len(), grid.m()));
        for (i, &c) in per.iter().enumerate() {
            let row = law.row(i);
            let total: f64 = row.sum();
            for _ in 0..c {
                let mut target = rng.random::<f64>() * total;
                let mut site = grid.m() - 1;
                for (k, &w) in row.iter().enumerate() {
                    if target < w {
                        site = k;
                        break;
                    }
                    target -= w;
                }
                counts[[i, site]] += 1;
            }
        }
        Self::new(grid, counts, scale, pi)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub(crate) fn counts_mut(&mut self) -> &mut Array2<u32> {
        &mut self.counts
    }

    /// The scale parameter `N`.
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn n_species(&self) -> usize {
        self.counts.nrows()
    }

    /// Particles per species.
    pub fn totals(&self) -> Vec<u32> {
        self.counts.rows().into_iter().map(|r| r.sum()).collect()
    }
}

/// Per-site frequencies `c_i(k) / ⌊π_i N⌋` of `species` at each sample time.
pub fn empirical_marginal(traj: &ParticleTrajectory, species: usize) -> Vec<Vec<f64>> {
    traj.snapshots
        .iter()
        .map(|c| {
            let row = c.row(species);
            let total: u32 = row.sum();
            row.iter()
                .map(|&v| if total == 0 { 0.0 } else { v as f64 / total as f64 })
                .collect()
        })
        .collect()
}

/// [`empirical_marginal`] averaged over trajectories sharing sample times.
pub fn average_empirical_marginal(trajs: &[ParticleTrajectory], species: usize) -> Vec<Vec<f64>> {
    let Some(first) = trajs.first() else {
        return Vec::new();
    };
    let mut acc = vec![vec![0.0; first.grid.m()]; first.snapshots.len()];
    for t in trajs {
        for (a, row) in acc.iter_mut().zip(empirical_marginal(t, species)) {
            for (x, y) in a.iter_mut().zip(row) {
                *x += y;
            }
        }
    }
    let w = 1.0 / trajs.len() as f64;
    acc.iter_mut().flatten().for_each(|x| *x *= w);
    acc
}
