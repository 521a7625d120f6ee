//! Periodic one-dimensional grid `x_k = k h`, `h = 1/M`, with the discrete
//! calculus used throughout: one-sided differences, the three-point
//! Laplacian, discrete `L^p` norms and the periodic P1 interpolant.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("norm exponent must satisfy p >= 1, got {0}")]
    BadExponent(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Uniform periodic grid on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self, GridError> {
        if m < 2 {
            return Err(GridError::TooFewSites(m));
        }
        Ok(Self { m })
    }

    /// Number of sites.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    /// Index `k + offset` reduced mod `M`.
    #[inline]
    pub fn wrap(&self, k: usize, offset: isize) -> usize {
        let m = self.m as isize;
        (k as isize + offset).rem_euclid(m) as usize
    }

    #[inline]
    pub fn next(&self, k: usize) -> usize {
        if k + 1 == self.m {
            0
        } else {
            k + 1
        }
    }

    #[inline]
    pub fn prev(&self, k: usize) -> usize {
        if k == 0 {
            self.m - 1
        } else {
            k - 1
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(move |k| self.x(k))
    }
}

/// Node values `w(x_k)` on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.m() {
            return Err(GridError::LengthMismatch {
                expected: grid.m(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.m()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn map_stencil(&self, f: impl Fn(usize) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: (0..self.grid.m()).map(f).collect(),
        }
    }

    /// `(w(k+1) − w(k)) / h`.
    pub fn forward_diff(&self) -> Self {
        let inv_h = self.grid.m() as f64;
        let w = &self.values;
        self.map_stencil(|k| (w[self.grid.next(k)] - w[k]) * inv_h)
    }

    /// `(w(k) − w(k−1)) / h`.
    pub fn backward_diff(&self) -> Self {
        let inv_h = self.grid.m() as f64;
        let w = &self.values;
        self.map_stencil(|k| (w[k] - w[self.grid.prev(k)]) * inv_h)
    }

    /// `(w(k+1) + w(k−1) − 2 w(k)) / h²`.
    pub fn laplacian(&self) -> Self {
        let mut out = vec![0.0; self.grid.m()];
        laplacian_into(&self.values, &mut out);
        Self {
            grid: self.grid,
            values: out,
        }
    }

    /// `(h Σ_k |w(x_k)|^p)^{1/p}`.
    pub fn discrete_norm(&self, p: f64) -> Result<f64, GridError> {
        Ok(self.discrete_norm_pow(p)?.powf(1.0 / p))
    }

    /// `h Σ_k |w(x_k)|^p`.
    pub fn discrete_norm_pow(&self, p: f64) -> Result<f64, GridError> {
        check_exponent(p)?;
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        Ok(self.grid.h() * s)
    }

    pub fn interpolate(&self) -> PiecewiseLinear<'_> {
        PiecewiseLinear { w: self }
    }

    /// Exact `‖w̃‖_{L^p}` of the interpolant.
    pub fn interpolant_lp_norm(&self, p: f64) -> Result<f64, GridError> {
        Ok(self.interpolant_lp_norm_pow(p)?.powf(1.0 / p))
    }

    /// Exact `‖w̃‖_{L^p}^p`, summed cell by cell in closed form.
    pub fn interpolant_lp_norm_pow(&self, p: f64) -> Result<f64, GridError> {
        check_exponent(p)?;
        let h = self.grid.h();
        let w = &self.values;
        let s: f64 = (0..self.grid.m())
            .map(|k| cell_abs_power_integral(w[k], w[self.grid.next(k)], p))
            .sum();
        Ok(h * s)
    }

    /// `‖∇w̃‖_{L^p}`; the interpolant's slope on cell `k` is `∇⁺_h w(x_k)`.
    pub fn interpolant_gradient_norm(&self, p: f64) -> Result<f64, GridError> {
        self.forward_diff().discrete_norm(p)
    }

    /// Rotates values so that `result(k) = w(k + shift)`.
    pub fn shifted(&self, shift: isize) -> Self {
        self.map_stencil(|k| self.values[self.grid.wrap(k, shift)])
    }

    /// `h Σ_k w(x_k)`.
    pub fn mass(&self) -> f64 {
        self.grid.h() * self.values.iter().sum::<f64>()
    }
}

/// Three-point periodic Laplacian on a raw slice, `h = 1/len`.
pub fn laplacian_into(w: &[f64], out: &mut [f64]) {
    let m = w.len();
    debug_assert_eq!(out.len(), m);
    let inv_h2 = (m * m) as f64;
    for k in 0..m {
        let l = if k == 0 { w[m - 1] } else { w[k - 1] };
        let r = if k + 1 == m { w[0] } else { w[k + 1] };
        out[k] = (r + l - 2.0 * w[k]) * inv_h2;
    }
}

fn check_exponent(p: f64) -> Result<(), GridError> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(GridError::BadExponent(p))
    }
}

/// `∫_0^1 |β a + (1−β) b|^p dβ`.
///
/// Same-sign endpoints use `(A^{p+1} − B^{p+1}) / ((p+1)(A − B))` on the
/// absolute values, with a two-term series around the midpoint when
/// `|A − B| < 1e-10 max(A, B)`. Endpoints of opposite sign split at the root.
pub fn cell_abs_power_integral(a: f64, b: f64, p: f64) -> f64 {
    if a * b < 0.0 {
        let (x, y) = (a.abs(), b.abs());
        return (x.powf(p + 1.0) + y.powf(p + 1.0)) / ((p + 1.0) * (x + y));
    }
    let (x, y) = (a.abs(), b.abs());
    let hi = x.max(y);
    if hi == 0.0 {
        return 0.0;
    }
    let delta = x - y;
    if delta.abs() < 1e-10 * hi {
        let mid = 0.5 * (x + y);
        let rel = delta / mid;
        return mid.powf(p) * (1.0 + p * (p - 1.0) / 24.0 * rel * rel);
    }
    (x.powf(p + 1.0) - y.powf(p + 1.0)) / ((p + 1.0) * delta)
}

/// The periodic P1 interpolant `w̃(x) = Σ_k w(x_k) T(x − x_k)`.
#[derive(Debug, Clone, Copy)]
pub struct PiecewiseLinear<'a> {
    w: &'a GridFunction,
}

impl PiecewiseLinear<'_> {
    /// Cell index and local coordinate `θ ∈ [0, 1)` of `x` (reduced mod 1).
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let m = self.w.grid.m();
        let y = x.rem_euclid(1.0) * m as f64;
        let mut k = y.floor() as usize;
        let mut theta = y - k as f64;
        if k >= m {
            k = m - 1;
            theta = 1.0;
        }
        (k, theta)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (k, theta) = self.locate(x);
        let v = &self.w.values;
        (1.0 - theta) * v[k] + theta * v[self.w.grid.next(k)]
    }

    /// Hat function `T(x) = (1 − |x|/h) 1_{|x| ≤ h}`.
    pub fn hat(h: f64, x: f64) -> f64 {
        let r = x.abs() / h;
        if r <= 1.0 {
            1.0 - r
        } else {
            0.0
        }
    }

    /// Direct evaluation of `Σ_k w(x_k) T(x − x_k) + w(x_0) T(x − x_M)` for
    /// `x ∈ [0, 1)`.
    pub fn eval_hat_sum(&self, x: f64) -> f64 {
        let g = self.w.grid;
        let h = g.h();
        let v = &self.w.values;
        let mut s: f64 = (0..g.m()).map(|k| v[k] * Self::hat(h, x - g.x(k))).sum();
        s += v[0] * Self::hat(h, x - 1.0);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(vals: &[f64]) -> GridFunction {
        GridFunction::new(Grid::new(vals.len()).unwrap(), vals.to_vec()).unwrap()
    }

    #[test]
    fn grid_rejects_single_site() {
        assert_eq!(Grid::new(1), Err(GridError::TooFewSites(1)));
    }

    #[test]
    fn stencils_on_indicator() {
        let w = gf(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(w.forward_diff().values(), &[4.0, -4.0, 0.0, 0.0]);
        assert_eq!(w.backward_diff().values(), &[0.0, 4.0, -4.0, 0.0]);
        assert_eq!(w.laplacian().values(), &[16.0, -32.0, 16.0, 0.0]);
    }

    #[test]
    fn constants_are_annihilated() {
        let w = GridFunction::constant(Grid::new(7).unwrap(), 3.5);
        assert!(w.forward_diff().values().iter().all(|&v| v == 0.0));
        assert!(w.backward_diff().values().iter().all(|&v| v == 0.0));
        assert!(w.laplacian().values().iter().all(|&v| v == 0.0));
        assert_eq!(w.interpolant_gradient_norm(2.0).unwrap(), 0.0);
    }

    #[test]
    fn backward_is_shifted_forward() {
        let w = gf(&[0.3, 1.0, -2.0, 5.0, 0.1]);
        let fwd = w.forward_diff().shifted(-1);
        assert_eq!(fwd.values(), w.backward_diff().values());
    }

    #[test]
    fn discrete_norm_cases() {
        let g = Grid::new(10).unwrap();
        for p in [1.0, 1.5, 2.0, 7.0] {
            approx::assert_relative_eq!(GridFunction::constant(g, 1.0).discrete_norm(p).unwrap(), 1.0, max_relative = 1e-14);
        }
        let mut v = vec![0.0; 10];
        v[1] = 1.0;
        let w = GridFunction::new(g, v).unwrap();
        approx::assert_relative_eq!(w.discrete_norm(2.0).unwrap(), 0.1f64.sqrt(), max_relative = 1e-15);
        assert_eq!(w.discrete_norm(0.5), Err(GridError::BadExponent(0.5)));
        assert!(w.interpolant_lp_norm(0.9).is_err());
        assert!(w.interpolant_gradient_norm(0.0).is_err());
    }

    #[test]
    fn interpolant_node_and_midpoint_values() {
        let w = gf(&[1.0, 3.0, -2.0, 0.5, 4.0]);
        let it = w.interpolate();
        let h = w.grid().h();
        for k in 0..5 {
            approx::assert_abs_diff_eq!(it.eval(w.grid().x(k)), w.values()[k], epsilon = 1e-14);
            let next = w.values()[(k + 1) % 5];
            approx::assert_abs_diff_eq!(it.eval(w.grid().x(k) + 0.5 * h), 0.5 * (w.values()[k] + next), epsilon = 1e-14);
        }
        for x in [0.0, 0.13, 0.5, 0.77, 0.99999] {
            approx::assert_abs_diff_eq!(it.eval(x), it.eval_hat_sum(x), epsilon = 1e-13);
        }
        let c = GridFunction::constant(Grid::new(4).unwrap(), 2.0);
        approx::assert_abs_diff_eq!(c.interpolate().eval(0.321), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn indicator_ratio_attains_lemma_bound() {
        let g = Grid::new(10).unwrap();
        let mut v = vec![0.0; 10];
        v[1] = 1.0;
        let w = GridFunction::new(g, v).unwrap();
        for p in [1.0, 2.0, 3.0, 4.0, 2.5] {
            let cont = w.interpolant_lp_norm_pow(p).unwrap();
            approx::assert_relative_eq!(cont, 2.0 * g.h() / (p + 1.0), max_relative = 1e-14);
            let ratio = w.discrete_norm_pow(p).unwrap() / cont;
            approx::assert_relative_eq!(ratio, (p + 1.0) / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_norm_two_cells() {
        let w = gf(&[0.0, 1.0]);
        approx::assert_relative_eq!(w.interpolant_gradient_norm(1.0).unwrap(), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn cell_integral_near_equal_endpoints_uses_series() {
        let a = 2.0;
        let b = 2.0 * (1.0 + 1e-12);
        let v = cell_abs_power_integral(a, b, 3.0);
        approx::assert_relative_eq!(v, 8.0, max_relative = 1e-11);
        assert_eq!(cell_abs_power_integral(0.0, 0.0, 2.0), 0.0);
        // sign change splits at the root: ∫|1 - 2β|dβ = 1/2
        approx::assert_relative_eq!(cell_abs_power_integral(1.0, -1.0, 1.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn cell_integral_matches_quadrature() {
        // composite Simpson, independent of the closed form
        let simpson = |a: f64, b: f64, p: f64| {
            let n = 20_000;
            let f = |t: f64| (t * a + (1.0 - t) * b).abs().powf(p);
            let hh = 1.0 / n as f64;
            let mut s = f(0.0) + f(1.0);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hh);
            }
            s * hh / 3.0
        };
        for &(a, b, p) in &[(0.3, 2.0, 2.0), (1.0, 0.0, 3.5), (-0.5, 1.5, 2.0), (4.0, 4.0, 1.0)] {
            approx::assert_relative_eq!(cell_abs_power_integral(a, b, p), simpson(a, b, p), max_relative = 1e-8);
        }
    }

    fn values(m: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        m.prop_flat_map(|m| prop::collection::vec(-1.0f64..1.0, m))
    }

    proptest! {
        #[test]
        fn summation_by_parts(pair in (2usize..40).prop_flat_map(|m| (
            prop::collection::vec(-1.0f64..1.0, m), prop::collection::vec(-1.0f64..1.0, m)))) {
            let g = Grid::new(pair.0.len()).unwrap();
            let w = GridFunction::new(g, pair.0).unwrap();
            let q = GridFunction::new(g, pair.1).unwrap();
            let lhs: f64 = w.forward_diff().values().iter().zip(q.values()).map(|(a, b)| a * b).sum();
            let rhs: f64 = -w.values().iter().zip(q.backward_diff().values()).map(|(a, b)| a * b).sum::<f64>();
            let scale = g.m() as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale * scale);
        }

        #[test]
        fn product_rule(pair in (2usize..30).prop_flat_map(|m| (
            prop::collection::vec(-1.0f64..1.0, m), prop::collection::vec(-1.0f64..1.0, m)))) {
            let g = Grid::new(pair.0.len()).unwrap();
            let w = GridFunction::new(g, pair.0).unwrap();
            let q = GridFunction::new(g, pair.1).unwrap();
            let wq = GridFunction::new(g, w.values().iter().zip(q.values()).map(|(a, b)| a * b).collect()).unwrap();
            let lhs = wq.forward_diff();
            let dq = q.forward_diff();
            let dw = w.forward_diff();
            for k in 0..g.m() {
                let rhs = w.values()[g.next(k)] * dq.values()[k] + dw.values()[k] * q.values()[k];
                prop_assert!((lhs.values()[k] - rhs).abs() <= 1e-12 * g.m() as f64);
            }
        }

        #[test]
        fn laplacian_factorisations(v in values(2..50)) {
            let w = GridFunction::new(Grid::new(v.len()).unwrap(), v).unwrap();
            let lap = w.laplacian();
            let bf = w.forward_diff().backward_diff();
            let fb = w.backward_diff().forward_diff();
            let m2 = (w.grid().m() * w.grid().m()) as f64;
            for k in 0..w.grid().m() {
                prop_assert!((lap.values()[k] - bf.values()[k]).abs() <= 1e-13 * m2);
                prop_assert!((lap.values()[k] - fb.values()[k]).abs() <= 1e-13 * m2);
            }
            let s: f64 = lap.values().iter().sum();
            prop_assert!(s.abs() <= 1e-12 * m2);
            let s: f64 = w.forward_diff().values().iter().sum();
            prop_assert!(s.abs() <= 1e-12 * w.grid().m() as f64);
        }

        #[test]
        fn norm_homogeneity(v in values(2..30), c in -5.0f64..5.0, p in 1.0f64..5.0) {
            let g = Grid::new(v.len()).unwrap();
            let w = GridFunction::new(g, v.clone()).unwrap();
            let cw = GridFunction::new(g, v.iter().map(|x| c * x).collect()).unwrap();
            let a = cw.discrete_norm(p).unwrap();
            let b = c.abs() * w.discrete_norm(p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn elementary_inequality(a in 0.0f64..10.0, b in 0.0f64..10.0, p in 1.0f64..6.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let lhs = (a.powf(p + 1.0) - b.powf(p + 1.0)) / (a - b);
            prop_assert!(lhs >= (a.powf(p) + b.powf(p)) * (1.0 - 1e-12));
        }
    }
}
