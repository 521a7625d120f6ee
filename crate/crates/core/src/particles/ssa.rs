//! Exact event-driven simulation (Gillespie direct method) on occupation
//! numbers.
//!
//! Aggregated event classes per site `k`:
//!
//! * single jump of species `i`, each direction: `D_i c_i(k)`
//! * pair jump of species `i < j`, each direction: `(D_ij / N) c_i(k) c_j(k)`
//! * pair jump within species `i`, each direction: `(D_ii / N) c_i(k)(c_i(k) − 1) / 2`
//!
//! Random numbers come from ChaCha8 keyed by `(seed, trial)`: the seed picks
//! the key, the trial picks the stream, and draws advance the block counter
//! with the event index, so every trial is reproducible on its own.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::ParticleConfig;
use crate::grid::Grid;
use crate::model::MicroParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn offset(self) -> isize {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    const BOTH: [Direction; 2] = [Direction::Plus, Direction::Minus];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventClass {
    Single { species: usize, site: usize, dir: Direction },
    /// `i ≤ j`; both particles move from `site` by the same `dir`.
    Pair { i: usize, j: usize, site: usize, dir: Direction },
}

/// Aggregated rates of every event class with positive rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub entries: Vec<(EventClass, f64)>,
}

impl RateTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, r)| r).sum()
    }

    pub fn rate(&self, class: &EventClass) -> f64 {
        self.entries
            .iter()
            .filter(|(c, _)| c == class)
            .map(|(_, r)| r)
            .sum()
    }
}

fn single_rate(micro: &MicroParams, species: usize, c: u32) -> f64 {
    micro.d()[species] * c as f64
}

fn pair_rate(micro: &MicroParams, scale: u32, i: usize, j: usize, ci: u32, cj: u32) -> f64 {
    let pairs = if i == j {
        (ci as f64) * (ci.saturating_sub(1) as f64) * 0.5
    } else {
        ci as f64 * cj as f64
    };
    micro.dij()[[i, j]] / scale as f64 * pairs
}

fn classes_at(config: &ParticleConfig, micro: &MicroParams, site: usize, out: &mut Vec<(EventClass, f64)>) {
    let n = config.n_species();
    let c = config.counts();
    for species in 0..n {
        let r = single_rate(micro, species, c[[species, site]]);
        if r > 0.0 {
            for dir in Direction::BOTH {
                out.push((EventClass::Single { species, site, dir }, r));
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let r = pair_rate(micro, config.scale(), i, j, c[[i, site]], c[[j, site]]);
            if r > 0.0 {
                for dir in Direction::BOTH {
                    out.push((EventClass::Pair { i, j, site, dir }, r));
                }
            }
        }
    }
}

/// Rates of every event class of `config`.
pub fn event_rates(config: &ParticleConfig, micro: &MicroParams) -> RateTable {
    let mut entries = Vec::new();
    for site in 0..config.grid().m() {
        classes_at(config, micro, site, &mut entries);
    }
    RateTable { entries }
}

/// Moves the particles of `class`. Panics if the class has no particle to
/// move, which cannot happen for classes drawn from [`event_rates`].
pub fn apply_event(config: &mut ParticleConfig, class: EventClass) {
    let grid = config.grid();
    let c = config.counts_mut();
    match class {
        EventClass::Single { species, site, dir } => {
            let to = grid.wrap(site, dir.offset());
            c[[species, site]] -= 1;
            c[[species, to]] += 1;
        }
        EventClass::Pair { i, j, site, dir } => {
            let to = grid.wrap(site, dir.offset());
            c[[i, site]] -= 1;
            c[[j, site]] -= 1;
            c[[i, to]] += 1;
            c[[j, to]] += 1;
        }
    }
}

/// Count snapshots of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleTrajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Array2<u32>>,
    /// Events fired up to the last sample time.
    pub events: u64,
}

/// RNG for trial `trial` of master seed `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Trial 0 of [`ssa_run_trial`].
pub fn ssa_run(
    config0: &ParticleConfig,
    micro: &MicroParams,
    t_end: f64,
    seed: u64,
    sample_times: &[f64],
) -> ParticleTrajectory {
    let mut rng = trial_rng(seed, 0);
    ssa_run_with(config0, micro, t_end, &mut rng, sample_times)
}

pub fn ssa_run_trial(
    config0: &ParticleConfig,
    micro: &MicroParams,
    t_end: f64,
    seed: u64,
    trial: u64,
    sample_times: &[f64],
) -> ParticleTrajectory {
    let mut rng = trial_rng(seed, trial);
    ssa_run_with(config0, micro, t_end, &mut rng, sample_times)
}

/// Per-site total rates, refreshed only where an event touched.
struct SiteRates<'a> {
    micro: &'a MicroParams,
    per_site: Vec<f64>,
    scratch: Vec<(EventClass, f64)>,
}

impl<'a> SiteRates<'a> {
    fn new(config: &ParticleConfig, micro: &'a MicroParams) -> Self {
        let mut s = Self {
            micro,
            per_site: vec![0.0; config.grid().m()],
            scratch: Vec::new(),
        };
        for k in 0..config.grid().m() {
            s.refresh(config, k);
        }
        s
    }

    fn refresh(&mut self, config: &ParticleConfig, site: usize) {
        let n = config.n_species();
        let c = config.counts();
        let mut r = 0.0;
        for i in 0..n {
            r += 2.0 * single_rate(self.micro, i, c[[i, site]]);
            for j in i..n {
                r += 2.0 * pair_rate(self.micro, config.scale(), i, j, c[[i, site]], c[[j, site]]);
            }
        }
        self.per_site[site] = r;
    }

    fn total(&self) -> f64 {
        self.per_site.iter().sum()
    }

    fn pick(&mut self, config: &ParticleConfig, u: f64) -> EventClass {
        let mut target = u * self.total();
        let mut site = None;
        for (k, &r) in self.per_site.iter().enumerate() {
            if r > 0.0 {
                site = Some(k);
                if target < r {
                    break;
                }
                target -= r;
            }
        }
        let site = site.expect("pick called with zero total rate");
        self.scratch.clear();
        classes_at(config, self.micro, site, &mut self.scratch);
        let mut chosen = self.scratch[self.scratch.len() - 1].0;
        let site_total: f64 = self.scratch.iter().map(|(_, r)| r).sum();
        let mut t = target.min(site_total);
        for &(class, r) in &self.scratch {
            if t < r {
                chosen = class;
                break;
            }
            t -= r;
        }
        chosen
    }
}

/// Direct-method SSA with an explicit RNG. If every rate vanishes the
/// configuration is frozen and the snapshots repeat it.
pub fn ssa_run_with<R: Rng + ?Sized>(
    config0: &ParticleConfig,
    micro: &MicroParams,
    t_end: f64,
    rng: &mut R,
    sample_times: &[f64],
) -> ParticleTrajectory {
    let mut config = config0.clone();
    let mut rates = SiteRates::new(&config, micro);
    let mut snapshots = Vec::with_capacity(sample_times.len());
    let mut times = Vec::with_capacity(sample_times.len());
    let mut t = 0.0;
    let mut events = 0u64;
    let mut pending = sample_times.iter().copied().filter(|&s| s <= t_end).peekable();
    loop {
        let total = rates.total();
        let wait = if total > 0.0 {
            let e: f64 = rng.sample(Exp1);
            e / total
        } else {
            f64::INFINITY
        };
        let t_next = t + wait;
        while let Some(&s) = pending.peek() {
            if s < t_next {
                times.push(s);
                snapshots.push(config.counts().clone());
                pending.next();
            } else {
                break;
            }
        }
        if pending.peek().is_none() || t_next > t_end {
            // remaining samples (if any) lie beyond the last event before t_end
            for s in pending {
                times.push(s);
                snapshots.push(config.counts().clone());
            }
            break;
        }
        let class = rates.pick(&config, rng.random::<f64>());
        apply_event(&mut config, class);
        let (a, b) = match class {
            EventClass::Single { site, dir, .. } | EventClass::Pair { site, dir, .. } => {
                (site, config.grid().wrap(site, dir.offset()))
            }
        };
        rates.refresh(&config, a);
        rates.refresh(&config, b);
        t = t_next;
        events += 1;
    }
    ParticleTrajectory {
        grid: config.grid(),
        times,
        snapshots,
        events,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_species(d: f64, dii: f64) -> MicroParams {
        MicroParams::new(vec![d], array![[dii]], vec![1.0]).unwrap()
    }

    #[test]
    fn single_particle_has_two_unit_classes() {
        let g = Grid::new(5).unwrap();
        let cfg = ParticleConfig::concentrated(g, 0, 1, &[1.0]).unwrap();
        let t = event_rates(&cfg, &one_species(1.0, 0.0));
        assert_eq!(t.entries.len(), 2);
        assert!(t.entries.iter().all(|(_, r)| *r == 1.0));
    }

    #[test]
    fn cross_species_pair_rate() {
        let g = Grid::new(3).unwrap();
        let counts = array![[2u32, 0, 0], [3, 0, 0]];
        // pi normalises to (0.4, 0.6): 2 and 3 particles at N = 5
        let cfg = ParticleConfig::new(g, counts, 5, &[0.2, 0.3]).unwrap();
        let micro = MicroParams::new(vec![0.0, 0.0], array![[0.0, 0.5], [0.5, 0.0]], vec![0.2, 0.3]).unwrap();
        let t = event_rates(&cfg, &micro);
        let plus = EventClass::Pair { i: 0, j: 1, site: 0, dir: Direction::Plus };
        let minus = EventClass::Pair { i: 0, j: 1, site: 0, dir: Direction::Minus };
        approx::assert_relative_eq!(t.rate(&plus), 0.6, max_relative = 1e-15);
        approx::assert_relative_eq!(t.rate(&minus), 0.6, max_relative = 1e-15);
        assert_eq!(t.entries.len(), 2);
    }

    #[test]
    fn same_species_pair_rate() {
        let g = Grid::new(3).unwrap();
        let cfg = ParticleConfig::new(g, array![[3u32, 0, 0]], 3, &[1.0]).unwrap();
        let micro = one_species(0.0, 1.0);
        let t = event_rates(&cfg, &micro);
        let plus = EventClass::Pair { i: 0, j: 0, site: 0, dir: Direction::Plus };
        // c(c-1)/2 / N = 3 / 3
        approx::assert_relative_eq!(t.rate(&plus), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn same_species_pair_rate_with_scale_ten() {
        // three co-located particles out of ten, D_11 = 1, N = 10
        let g = Grid::new(3).unwrap();
        let cfg = ParticleConfig::new(g, array![[3u32, 7, 0]], 10, &[1.0]).unwrap();
        let t = event_rates(&cfg, &one_species(0.0, 1.0));
        let plus = EventClass::Pair { i: 0, j: 0, site: 0, dir: Direction::Plus };
        approx::assert_relative_eq!(t.rate(&plus), 0.3, max_relative = 1e-15);
    }

    #[test]
    fn frozen_when_rates_vanish() {
        let g = Grid::new(4).unwrap();
        let cfg = ParticleConfig::new(g, array![[1u32, 2, 0, 1]], 4, &[1.0]).unwrap();
        let traj = ssa_run(&cfg, &one_species(0.0, 0.0), 10.0, 7, &[0.0, 5.0, 10.0]);
        assert_eq!(traj.events, 0);
        assert!(traj.snapshots.iter().all(|s| s == cfg.counts()));
    }

    #[test]
    fn pair_event_keeps_partners_together() {
        let g = Grid::new(4).unwrap();
        let mut cfg = ParticleConfig::new(g, array![[1u32, 0, 0, 0], [1, 0, 0, 0]], 2, &[0.5, 0.5]).unwrap();
        apply_event(&mut cfg, EventClass::Pair { i: 0, j: 1, site: 0, dir: Direction::Minus });
        assert_eq!(cfg.counts(), &array![[0u32, 0, 0, 1], [0, 0, 0, 1]]);
    }

    #[test]
    fn deterministic_given_seed_and_conserving() {
        let g = Grid::new(6).unwrap();
        let micro = MicroParams::new(vec![1.0, 0.5], array![[1.0, 2.0], [2.0, 0.5]], vec![0.5, 0.5]).unwrap();
        let cfg = ParticleConfig::concentrated(g, 2, 20, &[0.5, 0.5]).unwrap();
        let times = crate::master::uniform_times(3.0, 7);
        let a = ssa_run_trial(&cfg, &micro, 3.0, 11, 4, &times);
        let b = ssa_run_trial(&cfg, &micro, 3.0, 11, 4, &times);
        let c = ssa_run_trial(&cfg, &micro, 3.0, 11, 5, &times);
        assert_eq!(a, b);
        assert_ne!(a.snapshots, c.snapshots);
        assert!(a.events > 0);
        for s in &a.snapshots {
            assert_eq!(s.row(0).sum(), 10);
            assert_eq!(s.row(1).sum(), 10);
        }
        assert_eq!(a.times, times);
    }

    #[test]
    fn single_particle_two_sites_is_balanced() {
        let g = Grid::new(2).unwrap();
        let cfg = ParticleConfig::concentrated(g, 0, 1, &[1.0]).unwrap();
        let micro = one_species(1.0, 0.0);
        // sample every 10 time units: correlation decays like e^{-40}
        let n = 10_000usize;
        let times: Vec<f64> = (1..=n).map(|j| 10.0 * j as f64).collect();
        let traj = ssa_run(&cfg, &micro, 10.0 * n as f64, 1, &times);
        let at0 = traj.snapshots.iter().filter(|s| s[[0, 0]] == 1).count() as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((at0 - 0.5).abs() < 3.0 * sigma, "{at0}");
        assert!(traj.events > 100_000);
    }
}
