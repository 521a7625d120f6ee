//! Exhaustive labeled-state oracle for tiny particle systems.
//!
//! A configuration lists the site of every particle, species by species:
//! `(x_1^1, …, x_1^{c_1}, x_2^1, …, x_n^{c_n})`. States are indexed in mixed
//! radix `M` with the first coordinate least significant.

use ndarray::Array2;

use super::{species_counts, ParticleError};
use crate::grid::Grid;
use crate::model::MicroParams;

/// Largest state space the oracle will enumerate.
pub const DEFAULT_ENUM_CAP: usize = 2_000_000;

/// Coordinate layout of a configuration (or marginal) with `per_species[i]`
/// particles of species `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    m: usize,
    per_species: Vec<usize>,
    offsets: Vec<usize>,
    pow: Vec<usize>,
    size: usize,
}

impl Layout {
    pub fn new(m: usize, per_species: Vec<usize>, cap: usize) -> Result<Self, ParticleError> {
        let len: usize = per_species.iter().sum();
        let size = (m as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(ParticleError::CapExceeded { size, cap });
        }
        let mut offsets = Vec::with_capacity(per_species.len());
        let mut acc = 0;
        for &c in &per_species {
            offsets.push(acc);
            acc += c;
        }
        let pow = (0..len).map(|p| m.pow(p as u32)).collect();
        Ok(Self {
            m,
            per_species,
            offsets,
            pow,
            size: size as usize,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of coordinates.
    pub fn len(&self) -> usize {
        self.pow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pow.is_empty()
    }

    pub fn per_species(&self) -> &[usize] {
        &self.per_species
    }

    /// Coordinate position of particle `label` (0-based) of `species`.
    pub fn coord(&self, species: usize, label: usize) -> usize {
        debug_assert!(label < self.per_species[species]);
        self.offsets[species] + label
    }

    /// Species owning each coordinate.
    pub fn species_of(&self) -> Vec<usize> {
        self.per_species
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect()
    }

    pub fn decode(&self, mut idx: usize, out: &mut [usize]) {
        for c in out.iter_mut() {
            *c = idx % self.m;
            idx /= self.m;
        }
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.pow).map(|(c, p)| c * p).sum()
    }

    /// Index of the state with coordinate `p` moved by `offset` (mod `M`),
    /// given that coordinate's current value.
    #[inline]
    pub fn shift(&self, idx: usize, p: usize, value: usize, offset: isize) -> usize {
        let m = self.m as isize;
        let new = (value as isize + offset).rem_euclid(m) as usize;
        idx - value * self.pow[p] + new * self.pow[p]
    }
}

/// Enumerated configuration space `Ω_M^N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledStateSpace {
    grid: Grid,
    layout: Layout,
    scale: u32,
}

impl LabeledStateSpace {
    /// `⌊π_i N⌋` particles per species (with `π` normalised).
    pub fn new(grid: Grid, pi: &[f64], scale: u32, cap: usize) -> Result<Self, ParticleError> {
        let counts: Vec<usize> = species_counts(pi, scale).into_iter().map(|c| c as usize).collect();
        Self::from_counts(grid, counts, scale, cap)
    }

    /// Explicit particle numbers per species with scale parameter `N`.
    pub fn from_counts(grid: Grid, counts: Vec<usize>, scale: u32, cap: usize) -> Result<Self, ParticleError> {
        if scale == 0 {
            return Err(ParticleError::InvalidConfig("N must be positive".into()));
        }
        Ok(Self {
            grid,
            layout: Layout::new(grid.m(), counts, cap)?,
            scale,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn size(&self) -> usize {
        self.layout.size()
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn counts(&self) -> &[usize] {
        self.layout.per_species()
    }

    /// `(species, label)` of every coordinate, labels 0-based.
    pub fn roster(&self) -> Vec<(usize, usize)> {
        self.counts()
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| (0..c).map(move |a| (i, a)))
            .collect()
    }

    /// Total particle count `Σ_i ⌊π_i N⌋`.
    pub fn particles(&self) -> usize {
        self.layout.len()
    }

    fn check_len(&self, v: &[f64]) -> Result<(), ParticleError> {
        if v.len() != self.size() {
            return Err(ParticleError::DimensionMismatch(format!(
                "vector has {} entries, space has {}",
                v.len(),
                self.size()
            )));
        }
        Ok(())
    }
}

/// Sparse generator `Q` in compressed-row form; `diag[x] = −Σ_y Q(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl Generator {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Off-diagonal transitions out of `x`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[x]..self.row_ptr[x + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.diag[x];
        }
        let r = self.row_ptr[x]..self.row_ptr[x + 1];
        match self.cols[r.clone()].binary_search(&y) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |a, d| a.max(d.abs()))
    }

    /// Forward (Kolmogorov) action `(Qᵀ μ)(x) = Σ_y μ(y) Q(y, x)`.
    pub fn apply_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.apply_forward_into(mu, &mut out);
        out
    }

    fn apply_forward_into(&self, mu: &[f64], out: &mut [f64]) {
        for (o, (&d, &m)) in out.iter_mut().zip(self.diag.iter().zip(mu)) {
            *o = d * m;
        }
        for y in 0..self.size() {
            let my = mu[y];
            for (x, r) in self.row(y) {
                out[x] += r * my;
            }
        }
    }

    /// Backward action `(Q f)(x) = Σ_y Q(x, y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.size())
            .map(|x| self.diag[x] * f[x] + self.row(x).map(|(y, r)| r * f[y]).sum::<f64>())
            .collect()
    }

    /// `max |Q(x, y) − Q(y, x)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.size() {
            for (y, r) in self.row(x) {
                worst = worst.max((r - self.entry(y, x)).abs());
            }
        }
        worst
    }

    /// `max_x |Σ_y Q(x, y)|`, including the diagonal.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.size())
            .map(|x| (self.diag[x] + self.row(x).map(|(_, r)| r).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_off_diagonal(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Builds `Q` for the reversible particle model on `space`.
pub fn build_generator(space: &LabeledStateSpace, micro: &MicroParams) -> Result<Generator, ParticleError> {
    let layout = space.layout();
    if micro.n() != layout.per_species().len() {
        return Err(ParticleError::DimensionMismatch("species count of rates and space differ".into()));
    }
    let species = layout.species_of();
    let p_len = layout.len();
    let inv_n = 1.0 / space.scale() as f64;
    let mut row_ptr = Vec::with_capacity(space.size() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(space.size());
    let mut coords = vec![0usize; p_len];
    let mut buf: Vec<(usize, f64)> = Vec::new();
    row_ptr.push(0);
    for x in 0..space.size() {
        layout.decode(x, &mut coords);
        buf.clear();
        for p in 0..p_len {
            let r = micro.d()[species[p]];
            if r > 0.0 {
                for off in [1isize, -1] {
                    buf.push((layout.shift(x, p, coords[p], off), r));
                }
            }
        }
        for p in 0..p_len {
            for q in (p + 1)..p_len {
                if coords[p] != coords[q] {
                    continue;
                }
                let r = micro.dij()[[species[p], species[q]]] * inv_n;
                if r > 0.0 {
                    for off in [1isize, -1] {
                        let y = layout.shift(x, p, coords[p], off);
                        let y = layout.shift(y, q, coords[q], off);
                        buf.push((y, r));
                    }
                }
            }
        }
        buf.sort_by_key(|&(y, _)| y);
        let mut out_rate = 0.0;
        let mut last: Option<usize> = None;
        for &(y, r) in buf.iter() {
            if y == x {
                continue;
            }
            out_rate += r;
            if last == Some(y) {
                *vals.last_mut().unwrap() += r;
            } else {
                cols.push(y);
                vals.push(r);
                last = Some(y);
            }
        }
        diag.push(-out_rate);
        row_ptr.push(cols.len());
    }
    Ok(Generator {
        row_ptr,
        cols,
        vals,
        diag,
    })
}

/// Right-hand side of the forward equation written as explicit
/// second differences over single particles and co-located pairs, without
/// going through the assembled generator.
pub fn eq4_rhs(space: &LabeledStateSpace, micro: &MicroParams, mu: &[f64]) -> Result<Vec<f64>, ParticleError> {
    space.check_len(mu)?;
    let layout = space.layout();
    let species = layout.species_of();
    let p_len = layout.len();
    let inv_n = 1.0 / space.scale() as f64;
    let mut coords = vec![0usize; p_len];
    let mut out = vec![0.0; space.size()];
    for (x, o) in out.iter_mut().enumerate() {
        layout.decode(x, &mut coords);
        let mut acc = 0.0;
        for p in 0..p_len {
            let up = layout.shift(x, p, coords[p], 1);
            let down = layout.shift(x, p, coords[p], -1);
            acc += micro.d()[species[p]] * (mu[up] + mu[down] - 2.0 * mu[x]);
        }
        let mut pairs = 0.0;
        for p in 0..p_len {
            for q in 0..p_len {
                if p == q || coords[p] != coords[q] {
                    continue;
                }
                let up = layout.shift(layout.shift(x, p, coords[p], 1), q, coords[q], 1);
                let down = layout.shift(layout.shift(x, p, coords[p], -1), q, coords[q], -1);
                pairs += micro.dij()[[species[p], species[q]]] * inv_n * (mu[up] + mu[down] - 2.0 * mu[x]);
            }
        }
        *o = acc + 0.5 * pairs;
    }
    Ok(out)
}

fn rk4_forward(q: &Generator, mu: &mut [f64], t_span: f64) {
    if t_span <= 0.0 {
        return;
    }
    let rate = q.max_exit_rate();
    if rate == 0.0 {
        return;
    }
    let steps = (t_span * rate / 0.1).ceil().max(1.0) as usize;
    let dt = t_span / steps as f64;
    let n = mu.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        q.apply_forward_into(mu, &mut k1);
        tmp.iter_mut().zip(mu.iter().zip(&k1)).for_each(|(t, (m, k))| *t = m + 0.5 * dt * k);
        q.apply_forward_into(&tmp, &mut k2);
        tmp.iter_mut().zip(mu.iter().zip(&k2)).for_each(|(t, (m, k))| *t = m + 0.5 * dt * k);
        q.apply_forward_into(&tmp, &mut k3);
        tmp.iter_mut().zip(mu.iter().zip(&k3)).for_each(|(t, (m, k))| *t = m + dt * k);
        q.apply_forward_into(&tmp, &mut k4);
        for i in 0..n {
            mu[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Solves `dμ/dt = Qᵀ μ` up to time `t` with RK4, `dt ≤ 0.1 / max |Q(x,x)|`.
pub fn evolve_mu(space: &LabeledStateSpace, q: &Generator, mu0: &[f64], t: f64) -> Result<Vec<f64>, ParticleError> {
    Ok(evolve_mu_sampled(space, q, mu0, &[t])?.pop().unwrap())
}

/// [`evolve_mu`] recording the law at each of the ascending `times`.
pub fn evolve_mu_sampled(
    space: &LabeledStateSpace,
    q: &Generator,
    mu0: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>, ParticleError> {
    space.check_len(mu0)?;
    if q.size() != space.size() {
        return Err(ParticleError::DimensionMismatch("generator and space differ".into()));
    }
    let mut mu = mu0.to_vec();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        rk4_forward(q, &mut mu, t - now);
        now = now.max(t);
        out.push(mu.clone());
    }
    Ok(out)
}

/// `Σ_x μ(x) log(μ(x) M^P)` with `P = Σ_i ⌊π_i N⌋`: relative entropy with
/// respect to the uniform law.
pub fn micro_entropy(space: &LabeledStateSpace, mu: &[f64]) -> Result<f64, ParticleError> {
    space.check_len(mu)?;
    let log_size = space.particles() as f64 * (space.grid().m() as f64).ln();
    let mut s = 0.0;
    for (x, &v) in mu.iter().enumerate() {
        if !(v > 0.0) {
            return Err(ParticleError::NonPositiveMeasure(x));
        }
        s += v * (v.ln() + log_size);
    }
    Ok(s)
}

/// `μ(x) = Π_{(i,a)} u_i(x_i^a)` for one-particle laws given as rows.
pub fn product_measure(space: &LabeledStateSpace, laws: &Array2<f64>) -> Result<Vec<f64>, ParticleError> {
    let layout = space.layout();
    if laws.dim() != (layout.per_species().len(), layout.m()) {
        return Err(ParticleError::DimensionMismatch("law shape".into()));
    }
    let species = layout.species_of();
    let mut coords = vec![0usize; layout.len()];
    Ok((0..space.size())
        .map(|x| {
            layout.decode(x, &mut coords);
            coords
                .iter()
                .zip(&species)
                .map(|(&c, &s)| laws[[s, c]])
                .product()
        })
        .collect())
}

/// Marginal over the first `p_i` particles of each species.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub p: Vec<usize>,
    pub layout: Layout,
    pub probs: Vec<f64>,
}

impl Marginal {
    pub fn prob(&self, coords: &[usize]) -> f64 {
        self.probs[self.layout.encode(coords)]
    }
}

fn marginal_layout(space: &LabeledStateSpace, p: &[usize]) -> Result<Layout, ParticleError> {
    let counts = space.counts();
    if p.len() != counts.len() || p.iter().zip(counts).any(|(a, b)| a > b) {
        return Err(ParticleError::BadMultiIndex(p.to_vec()));
    }
    Layout::new(space.grid().m(), p.to_vec(), usize::MAX)
}

fn project_vector(space: &LabeledStateSpace, v: &[f64], target: &Layout) -> Vec<f64> {
    let layout = space.layout();
    let mut out = vec![0.0; target.size()];
    let mut coords = vec![0usize; layout.len()];
    let mut kept = vec![0usize; target.len()];
    let keep: Vec<usize> = target
        .per_species()
        .iter()
        .enumerate()
        .flat_map(|(i, &pi)| (0..pi).map(move |a| (i, a)))
        .map(|(i, a)| layout.coord(i, a))
        .collect();
    for (x, &val) in v.iter().enumerate() {
        layout.decode(x, &mut coords);
        for (k, &src) in kept.iter_mut().zip(&keep) {
            *k = coords[src];
        }
        out[target.encode(&kept)] += val;
    }
    out
}

/// Projection `μ^{N;(p)}` onto the first `p_i` coordinates of each species.
pub fn project_marginal(space: &LabeledStateSpace, mu: &[f64], p: &[usize]) -> Result<Marginal, ParticleError> {
    space.check_len(mu)?;
    let layout = marginal_layout(space, p)?;
    let probs = project_vector(space, mu, &layout);
    Ok(Marginal {
        p: p.to_vec(),
        layout,
        probs,
    })
}

/// Largest change of `μ` under a transposition of two labels of the same
/// species (adjacent transpositions generate every within-species
/// permutation).
pub fn is_exchangeable(space: &LabeledStateSpace, mu: &[f64]) -> Result<f64, ParticleError> {
    space.check_len(mu)?;
    let layout = space.layout();
    let mut coords = vec![0usize; layout.len()];
    let mut worst = 0.0f64;
    for x in 0..space.size() {
        layout.decode(x, &mut coords);
        for (i, &c) in layout.per_species().iter().enumerate() {
            for a in 1..c {
                let (p, q) = (layout.coord(i, a - 1), layout.coord(i, a));
                coords.swap(p, q);
                let y = layout.encode(&coords);
                coords.swap(p, q);
                worst = worst.max((mu[x] - mu[y]).abs());
            }
        }
    }
    Ok(worst)
}

/// Average of `μ` over within-species relabelings.
pub fn symmetrize(space: &LabeledStateSpace, mu: &[f64]) -> Result<Vec<f64>, ParticleError> {
    space.check_len(mu)?;
    let layout = space.layout();
    let mut coords = vec![0usize; layout.len()];
    let canonical: Vec<usize> = (0..space.size())
        .map(|x| {
            layout.decode(x, &mut coords);
            for (i, &c) in layout.per_species().iter().enumerate() {
                let s = layout.coord(i, 0).min(coords.len());
                coords[s..s + c].sort_unstable();
            }
            layout.encode(&coords)
        })
        .collect();
    let mut sum = vec![0.0; space.size()];
    let mut cnt = vec![0u32; space.size()];
    for (x, &c) in canonical.iter().enumerate() {
        sum[c] += mu[x];
        cnt[c] += 1;
    }
    Ok(canonical.iter().map(|&c| sum[c] / cnt[c] as f64).collect())
}

/// Time derivative of `μ^{N;(p)}` via the marginal hierarchy: linear
/// diffusion of the retained particles (I), their mutual pair jumps (II),
/// and pair jumps with one not-retained partner, weighted by
/// `D_ij (⌊π_j N⌋ − p_j) / N` and read off the `p + e_j` marginal (III).
pub fn hierarchy_rhs(space: &LabeledStateSpace, micro: &MicroParams, mu: &[f64], p: &[usize]) -> Result<Vec<f64>, ParticleError> {
    let base = project_marginal(space, mu, p)?;
    let counts = space.counts();
    let n = counts.len();
    let inv_n = 1.0 / space.scale() as f64;
    let extended: Vec<Option<Marginal>> = (0..n)
        .map(|j| {
            if p[j] < counts[j] {
                let mut pe = p.to_vec();
                pe[j] += 1;
                project_marginal(space, mu, &pe).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, _>>()?;

    let lay = &base.layout;
    let species = lay.species_of();
    let len = lay.len();
    let mut coords = vec![0usize; len];
    let mut out = vec![0.0; lay.size()];
    for (x, o) in out.iter_mut().enumerate() {
        lay.decode(x, &mut coords);
        let f = &base.probs;
        let mut term_i = 0.0;
        for q in 0..len {
            let up = lay.shift(x, q, coords[q], 1);
            let down = lay.shift(x, q, coords[q], -1);
            term_i += micro.d()[species[q]] * (f[up] + f[down] - 2.0 * f[x]);
        }
        let mut term_ii = 0.0;
        for q in 0..len {
            for r in 0..len {
                if q == r || coords[q] != coords[r] {
                    continue;
                }
                let up = lay.shift(lay.shift(x, q, coords[q], 1), r, coords[r], 1);
                let down = lay.shift(lay.shift(x, q, coords[q], -1), r, coords[r], -1);
                term_ii += micro.dij()[[species[q], species[r]]] * inv_n * (f[up] + f[down] - 2.0 * f[x]);
            }
        }
        term_ii *= 0.5;
        let mut term_iii = 0.0;
        for (j, ext) in extended.iter().enumerate() {
            let Some(ext) = ext else { continue };
            let el = &ext.layout;
            let weight = (counts[j] - p[j]) as f64 * inv_n;
            let mut ext_coords = vec![0usize; el.len()];
            for q in 0..len {
                let i = species[q];
                let a = q - lay.coord(i, 0);
                // insert the partner at the retained particle's site
                for (s, &pp) in p.iter().enumerate() {
                    for b in 0..pp {
                        ext_coords[el.coord(s, b)] = coords[lay.coord(s, b)];
                    }
                }
                let new = el.coord(j, p[j]);
                ext_coords[new] = coords[q];
                let mine = el.coord(i, a);
                let y = el.encode(&ext_coords);
                let up = el.shift(el.shift(y, mine, ext_coords[mine], 1), new, ext_coords[new], 1);
                let down = el.shift(el.shift(y, mine, ext_coords[mine], -1), new, ext_coords[new], -1);
                term_iii += micro.dij()[[i, j]] * weight * (ext.probs[up] + ext.probs[down] - 2.0 * ext.probs[y]);
            }
        }
        *o = term_i + term_ii + term_iii;
    }
    Ok(out)
}

/// Max-norm difference between the projected forward derivative of `μ` and
/// the hierarchy expression for `d/dt μ^{N;(p)}`. Requires `μ`
/// exchangeable within species to `1e-12`.
pub fn bbgky_check(space: &LabeledStateSpace, micro: &MicroParams, mu: &[f64], p: &[usize]) -> Result<f64, ParticleError> {
    let dev = is_exchangeable(space, mu)?;
    if dev > 1e-12 {
        return Err(ParticleError::SymmetryViolation(dev));
    }
    let layout = marginal_layout(space, p)?;
    let q = build_generator(space, micro)?;
    let projected = project_vector(space, &q.apply_forward(mu), &layout);
    let hierarchy = hierarchy_rhs(space, micro, mu, p)?;
    Ok(projected
        .iter()
        .zip(&hierarchy)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `sup |μ^{(e_i+e_j)}(x, y) − μ^{(e_i)}(x) μ^{(e_j)}(y)|` over sites and
/// over species pairs that have two distinct particles available.
pub fn covariance_defect(space: &LabeledStateSpace, mu: &[f64]) -> Result<f64, ParticleError> {
    let counts = space.counts().to_vec();
    let n = counts.len();
    let m = space.grid().m();
    let unit = |i: usize, k: usize| {
        let mut v = vec![0; n];
        v[i] += k;
        v
    };
    let singles: Vec<Option<Marginal>> = (0..n)
        .map(|i| if counts[i] > 0 { project_marginal(space, mu, &unit(i, 1)).map(Some) } else { Ok(None) })
        .collect::<Result<_, _>>()?;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let mut p = vec![0; n];
            p[i] += 1;
            p[j] += 1;
            if p.iter().zip(&counts).any(|(a, b)| a > b) {
                continue;
            }
            let pair = project_marginal(space, mu, &p)?;
            let (Some(ui), Some(uj)) = (&singles[i], &singles[j]) else { continue };
            let (ci, cj) = if i == j {
                (pair.layout.coord(i, 0), pair.layout.coord(i, 1))
            } else {
                (pair.layout.coord(i, 0), pair.layout.coord(j, 0))
            };
            let mut coords = vec![0usize; 2];
            for x in 0..m {
                for y in 0..m {
                    coords[ci] = x;
                    coords[cj] = y;
                    let joint = pair.prob(&coords);
                    worst = worst.max((joint - ui.probs[x] * uj.probs[y]).abs());
                }
            }
        }
    }
    Ok(worst)
}
