//! Ensemble SDE-flow regularization for nonlinear ill-posed operator
//! equations.
//!
//! Given a forward operator `F` acting on functions sampled on a uniform
//! grid, noisy data `y^δ` with noise level `δ`, and an initial guess
//! `x̄`, the solver integrates an ensemble of `N` stochastic flows
//!
//! ```text
//!     dx(t) = F'(x(t))* (y^δ - F(x(t))) dt + f(t) dB(t),    x(0) = x̄,
//! ```
//!
//! with the explicit Euler-Maruyama scheme. The drift is the classical
//! asymptotic-regularization (Landweber flow) direction; the diffusion
//! injects a Q-Wiener increment whose shared amplitude `f_k = r_k * s_k`
//! couples the ensemble root-mean-square residual `r_k` to a decaying
//! schedule `s_k = θ/√(1+t_k)`, so randomization is strong early and
//! self-anneals as the fit improves. `θ = 0` recovers the deterministic
//! flow bit for bit. Integration stops by a mean-square discrepancy
//! principle: at the first step with `r_k² < τ²δ²` the ensemble is the
//! reconstruction, and its spread quantifies uncertainty.
//!
//! # Module map
//!
//! * [`grid`]: uniform 1D/2D grids, node-value vectors, the discrete L²
//!   inner product.
//! * [`operator`]: the forward-operator contract (apply, derivative,
//!   adjoint, admissibility projection).
//! * [`wiener`]: Q-Wiener increment sampling and counter-based RNG
//!   streams for reproducible parallel noise.
//! * [`problems`]: benchmark operators, an elliptic parameter
//!   identification problem in 1D/2D and a diagonal linear operator with
//!   constructible source conditions, plus noisy-data synthesis.
//! * [`flow`]: the ensemble integrator, parameter admissibility,
//!   the discrepancy stopping rule, and run records.
//! * [`theory`]: the closed-form constants chain behind the convergence
//!   rate, numerical verifiers for the two auxiliary bounds, and an
//!   empirical tangential-cone probe.
//! * [`diagnostics`]: RMSE/RMSR, the exact bias-variance split,
//!   pointwise confidence bands, and log-log rate regression.
//!
//! # Quick start
//!
//! Reconstruct a spectrally mild parameter of a diagonal operator from 1%
//! noise and inspect the stopped ensemble:
//!
//! ```
//! use sar::flow::{self, SarConfig, Termination};
//! use sar::grid::GridVector;
//! use sar::problems::{synthesize_data, DiagonalProblem};
//! use sar::wiener::RngStream;
//!
//! let problem = DiagonalProblem::with_power_spectrum(50, 1.0);
//! let case = problem.make_source_case(0.5, 0.1, &mut RngStream::new(7).rng(0, 0));
//!
//! let y = problem.apply(&case.x_true);
//! let noise = 1e-2;
//! let y_delta = synthesize_data(&y, noise, &mut RngStream::new(8).rng(0, 0));
//! let delta = y_delta.distance(&y);
//!
//! let cfg = SarConfig {
//!     delta,
//!     theta: 0.05,
//!     ensemble_size: 20,
//!     dt: 0.5,
//!     ..SarConfig::default()
//! };
//! let record = flow::run(&problem, &case.x_bar, Some(&case.x_true), &y_delta, &cfg)?;
//!
//! assert_eq!(record.termination, Termination::Stopped);
//! let final_rmse = *record.rmse.as_ref().unwrap().last().unwrap();
//! assert!(final_rmse < record.rmse.as_ref().unwrap()[0]);
//! # Ok::<(), sar::flow::FlowError>(())
//! ```

pub mod diagnostics;
pub mod flow;
pub mod grid;
pub mod operator;
pub mod problems;
pub mod theory;
pub mod wiener;

/// Doc-tested inclusion of the book chapters, so every snippet in
/// `book/src` is compiled and run by `cargo test --doc` and cannot drift
/// from the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/grids.md")]
    pub struct Grids;
    #[doc = include_str!("../../../book/src/operators.md")]
    pub struct Operators;
    #[doc = include_str!("../../../book/src/noise.md")]
    pub struct Noise;
    #[doc = include_str!("../../../book/src/flow.md")]
    pub struct Flow;
    #[doc = include_str!("../../../book/src/theory.md")]
    pub struct Theory;
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub struct Diagnostics;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
