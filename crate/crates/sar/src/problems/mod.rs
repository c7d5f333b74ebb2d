//! Benchmark forward operators, preset scenarios, and data synthesis.
//!
//! Two families are provided. [`EllipticProblem`] identifies the zeroth-order
//! coefficient of a Neumann reaction-diffusion equation from observations of
//! its solution; it is the nonlinear workhorse. [`DiagonalProblem`] is a
//! linear multiplication operator whose flow has a closed form, which makes
//! it the reference instrument for convergence studies.
//!
//! [`synthesize_data`] perturbs clean data with scaled white noise, and the
//! `elliptic_1d` / `elliptic_2d` presets bundle a grid, a ground-truth
//! coefficient, and a constant initial guess into a ready-to-run scenario.

pub mod diagonal;
pub mod elliptic;

pub use diagonal::{DiagonalProblem, SourceCase};
pub use elliptic::{assemble_and_solve, EllipticProblem};

use crate::grid::{GridSpec, GridVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Ground-truth coefficient for the preset identification scenarios.
///
/// On a 1D grid this is `2 + cos(pi x)`, on a 2D grid
/// `1 + sin(pi x1) + cos(x2)`. Both stay in `[1, 3]`, comfortably inside
/// the positive cone where the elliptic operator is well defined.
pub fn true_parameter(grid: &GridSpec) -> GridVector {
    match grid.dim() {
        1 => GridVector::sample(grid, |p| 2.0 + (PI * p[0]).cos()),
        _ => GridVector::sample(grid, |p| 1.0 + (PI * p[0]).sin() + p[1].cos()),
    }
}

/// Constant initial guess used by the presets: the domain mean of
/// [`true_parameter`] (`2` in 1D; `1 + sin(1)` in 2D, since the odd sine
/// term integrates to zero over `[-1, 1]`).
pub fn preset_initial_guess(grid: &GridSpec) -> GridVector {
    let mean = match grid.dim() {
        1 => 2.0,
        _ => 1.0 + 1.0_f64.sin(),
    };
    GridVector::constant(grid, mean)
}

/// A ready-to-run elliptic identification scenario.
pub struct EllipticSetup {
    /// Forward operator with source term `w = 1`.
    pub problem: EllipticProblem,
    /// Coefficient that generated the data.
    pub c_true: GridVector,
    /// Constant initial guess (domain mean of `c_true`).
    pub x_bar: GridVector,
}

/// 1D preset: `-u'' + c u = 1` on `[-1, 1]` with `c = 2 + cos(pi x)`.
///
/// `n` is the number of grid nodes; the reference resolution is `n = 1000`.
pub fn elliptic_1d(n: usize) -> EllipticSetup {
    let grid = GridSpec::line(n, -1.0, 1.0);
    setup_on(grid)
}

/// 2D preset: `-laplace(u) + c u = 1` on `[-1, 1]^2` with
/// `c = 1 + sin(pi x1) + cos(x2)`.
///
/// `n` is the number of nodes per axis; the reference resolution is
/// `n = 128`.
pub fn elliptic_2d(n: usize) -> EllipticSetup {
    let grid = GridSpec::square(n, -1.0, 1.0);
    setup_on(grid)
}

fn setup_on(grid: GridSpec) -> EllipticSetup {
    let w = GridVector::constant(&grid, 1.0);
    EllipticSetup {
        problem: EllipticProblem::new(grid, w),
        c_true: true_parameter(&grid),
        x_bar: preset_initial_guess(&grid),
    }
}

/// Perturbs clean data `u` into `u + delta * max|u| * xi` with `xi` iid
/// standard normal, one draw per node in grid order.
///
/// `delta = 0` returns `u` unchanged without consuming randomness, so a
/// noise-free run is bit-identical to the clean data. The perturbation is
/// proportional to the sup norm of `u`: doubling `u` doubles the noise
/// realized from the same generator state.
pub fn synthesize_data(u: &GridVector, delta: f64, rng: &mut impl Rng) -> GridVector {
    assert!(delta >= 0.0 && delta.is_finite(), "noise level must be finite and nonnegative");
    if delta == 0.0 {
        return u.clone();
    }
    let amp = delta * u.max_abs();
    let mut out = u.clone();
    for v in out.values_mut() {
        let xi: f64 = rng.sample(StandardNormal);
        *v += amp * xi;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::RngStream;

    #[test]
    fn true_parameter_1d_matches_closed_form() {
        let grid = GridSpec::line(201, -1.0, 1.0);
        let c = true_parameter(&grid);
        // x = 0 sits at the middle node of an odd grid.
        assert!((c[100] - 3.0).abs() < 1e-12);
        assert!((c[0] - 1.0).abs() < 1e-12);
        assert!((c[200] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn true_parameter_2d_matches_closed_form() {
        let grid = GridSpec::square(51, -1.0, 1.0);
        let c = true_parameter(&grid);
        let mid = grid.index2(25, 25);
        assert!((c[mid] - 2.0).abs() < 1e-12, "at the origin sin vanishes and cos is 1");
        let corner = grid.index2(0, 0);
        let expected = 1.0 + (-PI).sin() + (-1.0_f64).cos();
        assert!((c[corner] - expected).abs() < 1e-12);
    }

    #[test]
    fn preset_initial_guess_is_domain_mean() {
        let g1 = GridSpec::line(11, -1.0, 1.0);
        assert_eq!(preset_initial_guess(&g1)[5], 2.0);
        let g2 = GridSpec::square(5, -1.0, 1.0);
        let want = 1.0 + 1.0_f64.sin();
        assert!((preset_initial_guess(&g2)[7] - want).abs() < 1e-15);
    }

    #[test]
    fn synthesize_noise_free_is_identity() {
        let grid = GridSpec::line(64, -1.0, 1.0);
        let u = GridVector::sample(&grid, |p| p[0].exp());
        let mut rng = RngStream::new(5).rng(0, 0);
        let u0 = synthesize_data(&u, 0.0, &mut rng);
        assert_eq!(u0, u);
    }

    #[test]
    fn synthesize_noise_has_requested_amplitude() {
        // With u = 1 and delta = 0.02 the per-node perturbation is
        // 0.02 * xi, so its sample standard deviation over 1e5 nodes should
        // match 0.02 to well within 2 percent.
        let grid = GridSpec::line(100_000, 0.0, 1.0);
        let u = GridVector::constant(&grid, 1.0);
        let mut rng = RngStream::new(42).rng(0, 0);
        let ud = synthesize_data(&u, 0.02, &mut rng);
        let n = grid.node_count() as f64;
        let mean: f64 = ud.values().iter().map(|v| v - 1.0).sum::<f64>() / n;
        let var: f64 = ud.values().iter().map(|v| (v - 1.0 - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        assert!(
            (sd - 0.02).abs() < 0.02 * 0.02,
            "sample sd {sd} should be within 2% of 0.02"
        );
    }

    #[test]
    fn synthesize_noise_scales_with_sup_norm() {
        let grid = GridSpec::line(50, -1.0, 1.0);
        let u = GridVector::sample(&grid, |p| 1.0 + p[0] * p[0]);
        let u2 = &u * 2.0;
        let d1 = synthesize_data(&u, 0.1, &mut RngStream::new(9).rng(0, 0));
        let d2 = synthesize_data(&u2, 0.1, &mut RngStream::new(9).rng(0, 0));
        // Identical generator state, doubled amplitude: the realized
        // perturbations agree bit for bit after halving.
        for i in 0..u.len() {
            let p1 = d1[i] - u[i];
            let p2 = d2[i] - u2[i];
            assert_eq!(2.0 * p1, p2);
        }
    }
}
