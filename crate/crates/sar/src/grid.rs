//! Uniform grids and the discrete L² geometry shared by every module.
//!
//! Everything the solver touches (parameters, PDE solutions, data, noise
//! increments) is a real-valued function sampled on a uniform grid:
//! `[lo, hi]` in 1D or `[lo, hi]²` in 2D, endpoints included, `n` nodes
//! per axis, spacing `h = (hi - lo)/(n - 1)`. [`GridSpec`] describes the
//! sampling and [`GridVector`] carries the node values (row-major in 2D,
//! first axis fastest).
//!
//! Inner products use the rectangle rule with the full weight `h^dim` at
//! every node, boundary included:
//!
//! ```text
//!     <u, v> = h^dim * sum_i u_i v_i
//! ```
//!
//! so norms approximate continuum L² norms and a noise level means the
//! same thing at every resolution. Uniform weights also keep the adjoint
//! of a symmetric system matrix equal to its transpose, which the
//! elliptic benchmark relies on for its closed-form adjoint. The price is
//! a boundary quadrature error of order `h` for integrands that do not
//! vanish at the endpoints; acceptable here because norms feed
//! thresholds, not high-order quadrature.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

/// Uniform sampling of `[lo, hi]` (1D) or `[lo, hi]²` (2D).
///
/// Copyable value type; all derived quantities (spacing, node count,
/// coordinates) are computed on demand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n_per_axis: usize,
    lo: f64,
    hi: f64,
}

impl GridSpec {
    /// 1D grid with `n_per_axis` nodes on `[lo, hi]`.
    ///
    /// # Panics
    ///
    /// Panics if `n_per_axis < 2`, if the endpoints are not finite, or if
    /// `hi <= lo`.
    pub fn line(n_per_axis: usize, lo: f64, hi: f64) -> Self {
        Self::new(1, n_per_axis, lo, hi)
    }

    /// 2D grid with `n_per_axis` nodes per axis on `[lo, hi]²`.
    ///
    /// # Panics
    ///
    /// Same conditions as [`GridSpec::line`].
    pub fn square(n_per_axis: usize, lo: f64, hi: f64) -> Self {
        Self::new(2, n_per_axis, lo, hi)
    }

    fn new(dim: usize, n_per_axis: usize, lo: f64, hi: f64) -> Self {
        assert!(dim == 1 || dim == 2, "grid dimension must be 1 or 2, got {dim}");
        assert!(n_per_axis >= 2, "need at least 2 nodes per axis, got {n_per_axis}");
        assert!(lo.is_finite() && hi.is_finite(), "grid endpoints must be finite");
        assert!(hi > lo, "grid needs hi > lo, got [{lo}, {hi}]");
        Self { dim, n_per_axis, lo, hi }
    }

    /// Spatial dimension, 1 or 2.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes along each axis.
    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    /// Lower interval endpoint.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Upper interval endpoint.
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Node spacing `h = (hi - lo)/(n_per_axis - 1)`.
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_per_axis - 1) as f64
    }

    /// Total number of nodes, `n_per_axis^dim`.
    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.n_per_axis,
            _ => self.n_per_axis * self.n_per_axis,
        }
    }

    /// Quadrature weight `h^dim` shared by every node.
    pub fn node_weight(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of node `i` along one axis.
    ///
    /// # Panics
    ///
    /// Panics if `i >= n_per_axis`.
    pub fn axis_coord(&self, i: usize) -> f64 {
        assert!(i < self.n_per_axis, "axis index {i} out of range");
        if i + 1 == self.n_per_axis {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    /// Flat index of the 2D node `(ix, iy)`; the first axis varies
    /// fastest.
    ///
    /// # Panics
    ///
    /// Panics on a 1D grid or if either index is out of range.
    pub fn index2(&self, ix: usize, iy: usize) -> usize {
        assert_eq!(self.dim, 2, "index2 needs a 2D grid");
        assert!(ix < self.n_per_axis && iy < self.n_per_axis, "node ({ix}, {iy}) out of range");
        iy * self.n_per_axis + ix
    }

    /// Coordinates of the node with flat index `idx`, as `[x1, x2]`; a 1D
    /// grid reports `x2 = 0`.
    ///
    /// # Panics
    ///
    /// Panics if `idx >= node_count()`.
    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        assert!(idx < self.node_count(), "node index {idx} out of range");
        match self.dim {
            1 => [self.axis_coord(idx), 0.0],
            _ => {
                let ix = idx % self.n_per_axis;
                let iy = idx / self.n_per_axis;
                [self.axis_coord(ix), self.axis_coord(iy)]
            }
        }
    }
}

/// Node values of a real function on a [`GridSpec`].
///
/// The grid travels with the values, so mixing vectors from different
/// grids is caught at the first inner product instead of producing a
/// silently wrong number.
#[derive(Clone, Debug, PartialEq)]
pub struct GridVector {
    grid: GridSpec,
    values: Vec<f64>,
}

impl GridVector {
    /// All-zero function on `grid`.
    pub fn zeros(grid: &GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Constant function on `grid`.
    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        Self { grid: *grid, values: vec![value; grid.node_count()] }
    }

    /// Wraps an existing value buffer.
    ///
    /// # Panics
    ///
    /// Panics if `values.len() != grid.node_count()`.
    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.node_count(),
            "value buffer length does not match the grid"
        );
        Self { grid: *grid, values }
    }

    /// Samples `f` at every node; `f` receives `[x1, x2]` coordinates
    /// (with `x2 = 0` on 1D grids).
    pub fn sample(grid: &GridSpec, mut f: impl FnMut(&[f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.node_coords(i))).collect();
        Self { grid: *grid, values }
    }

    /// The grid this function lives on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True only for the degenerate empty buffer (cannot be constructed
    /// through this module; present for completeness).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node values, flat (first axis fastest in 2D).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable node values.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Discrete L² inner product `h^dim * sum_i u_i v_i`.
    ///
    /// Symmetric and bilinear by construction.
    ///
    /// # Panics
    ///
    /// Panics if the two vectors live on different grids.
    pub fn inner(&self, other: &GridVector) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product of vectors on different grids");
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        self.grid.node_weight() * dot
    }

    /// Discrete L² norm `sqrt(<u, u>)`.
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `||self - other||` without allocating the difference.
    ///
    /// # Panics
    ///
    /// Panics if the two vectors live on different grids.
    pub fn distance(&self, other: &GridVector) -> f64 {
        assert_eq!(self.grid, other.grid, "distance of vectors on different grids");
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        (self.grid.node_weight() * sum).sqrt()
    }

    /// Largest absolute node value (0 for the empty buffer).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True iff every node value is finite.
    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// In-place `self += alpha * x`.
    ///
    /// # Panics
    ///
    /// Panics on a grid mismatch.
    pub fn axpy(&mut self, alpha: f64, x: &GridVector) {
        assert_eq!(self.grid, x.grid, "axpy of vectors on different grids");
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a += alpha * b;
        }
    }

    /// In-place multiplication by a scalar.
    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.values {
            *a *= alpha;
        }
    }

    /// New vector with `f` applied at every node.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridVector {
        GridVector { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// New vector combining matching nodes of `self` and `other`.
    ///
    /// # Panics
    ///
    /// Panics on a grid mismatch.
    pub fn zip_map(&self, other: &GridVector, f: impl Fn(f64, f64) -> f64) -> GridVector {
        assert_eq!(self.grid, other.grid, "zip_map of vectors on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridVector { grid: self.grid, values }
    }
}

impl Index<usize> for GridVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for GridVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

impl Add for &GridVector {
    type Output = GridVector;

    fn add(self, rhs: &GridVector) -> GridVector {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &GridVector {
    type Output = GridVector;

    fn sub(self, rhs: &GridVector) -> GridVector {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &GridVector {
    type Output = GridVector;

    fn mul(self, rhs: f64) -> GridVector {
        self.map(|a| a * rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_constant_on_two_nodes() {
        let grid = GridSpec::line(2, -1.0, 1.0);
        let u = GridVector::constant(&grid, 1.0);
        assert_eq!(u.inner(&u), 4.0);
    }

    #[test]
    fn inner_disjoint_support_is_zero() {
        let grid = GridSpec::line(5, 0.0, 1.0);
        let mut u = GridVector::zeros(&grid);
        let mut v = GridVector::zeros(&grid);
        u[0] = 1.0;
        v[1] = 1.0;
        assert_eq!(u.inner(&v), 0.0);
    }

    /// With full boundary weights the rectangle rule applied to cos²(πx)
    /// on [−1, 1] evaluates to exactly 1 + h (not the integral 1): the
    /// oscillatory part telescopes to h/2 by a Dirichlet-kernel sum, and
    /// the endpoints each contribute an extra h/2. Frozen here so a
    /// quadrature change cannot slip through silently.
    #[test]
    fn inner_cosine_squared_matches_rectangle_rule_value() {
        let grid = GridSpec::line(1000, -1.0, 1.0);
        let u = GridVector::sample(&grid, |x| (std::f64::consts::PI * x[0]).cos());
        let expected = 1.0 + grid.spacing();
        assert!((u.inner(&u) - expected).abs() < 1e-9, "got {}", u.inner(&u));
    }

    /// sin²(πx) vanishes at the endpoints, so the same rule reproduces
    /// the continuum value exactly.
    #[test]
    fn norm_sine_is_one() {
        let grid = GridSpec::line(1000, -1.0, 1.0);
        let u = GridVector::sample(&grid, |x| (std::f64::consts::PI * x[0]).sin());
        assert!((u.norm() - 1.0).abs() < 1e-4);
        assert!((u.norm() - 1.0).abs() < 1e-9, "exact telescoping expected");
    }

    #[test]
    fn norm_pythagorean_pair() {
        let grid = GridSpec::line(2, 0.0, 1.0);
        let u = GridVector::from_values(&grid, vec![3.0, 4.0]);
        assert_eq!(u.norm(), 5.0);
    }

    #[test]
    fn norm_zero_vector() {
        let grid = GridSpec::square(4, -1.0, 1.0);
        assert_eq!(GridVector::zeros(&grid).norm(), 0.0);
    }

    #[test]
    fn square_grid_coordinates_round_trip() {
        let grid = GridSpec::square(3, -1.0, 1.0);
        assert_eq!(grid.node_count(), 9);
        assert_eq!(grid.index2(2, 1), 5);
        assert_eq!(grid.node_coords(5), [1.0, 0.0]);
        assert_eq!(grid.node_coords(8), [1.0, 1.0]);
    }

    #[test]
    fn axis_coord_hits_endpoints_exactly() {
        let grid = GridSpec::line(7, -1.0, 1.0);
        assert_eq!(grid.axis_coord(0), -1.0);
        assert_eq!(grid.axis_coord(6), 1.0);
    }

    #[test]
    fn distance_matches_norm_of_difference() {
        let grid = GridSpec::line(9, 0.0, 2.0);
        let u = GridVector::sample(&grid, |x| x[0] * x[0]);
        let v = GridVector::sample(&grid, |x| x[0].sin());
        let diff = &u - &v;
        assert!((u.distance(&v) - diff.norm()).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "different grids")]
    fn inner_rejects_grid_mismatch() {
        let a = GridVector::zeros(&GridSpec::line(4, 0.0, 1.0));
        let b = GridVector::zeros(&GridSpec::line(4, 0.0, 2.0));
        let _ = a.inner(&b);
    }

    proptest! {
        #[test]
        fn inner_is_symmetric(seed in 0u64..1000) {
            let grid = GridSpec::line(17, -1.0, 1.0);
            let u = pseudo_vector(&grid, seed);
            let v = pseudo_vector(&grid, seed.wrapping_add(991));
            prop_assert!((u.inner(&v) - v.inner(&u)).abs() <= 1e-12 * (1.0 + u.inner(&v).abs()));
        }

        #[test]
        fn inner_is_linear_in_first_argument(
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let grid = GridSpec::line(17, -1.0, 1.0);
            let u = pseudo_vector(&grid, seed);
            let w = pseudo_vector(&grid, seed.wrapping_add(17));
            let v = pseudo_vector(&grid, seed.wrapping_add(39));
            let mut combo = &u * a;
            combo.axpy(b, &w);
            let lhs = combo.inner(&v);
            let rhs = a * u.inner(&v) + b * w.inner(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs() + rhs.abs()));
        }

        #[test]
        fn norm_is_positive_definite(seed in 0u64..1000) {
            let grid = GridSpec::line(17, -1.0, 1.0);
            let u = pseudo_vector(&grid, seed);
            prop_assert!(u.norm() >= 0.0);
            if u.max_abs() > 1e-9 {
                prop_assert!(u.norm() > 0.0);
            }
        }
    }

    /// Cheap deterministic filler so property tests do not need an RNG
    /// dependency here.
    fn pseudo_vector(grid: &GridSpec, seed: u64) -> GridVector {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        GridVector::sample(grid, |_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
    }
}
