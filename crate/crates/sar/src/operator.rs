//! The forward-operator contract every benchmark problem implements and
//! the integrator consumes.
//!
//! A problem is an operator `F` from parameters on `param_grid` to data
//! on `data_grid`, together with its Fréchet derivative `F'(x)` applied
//! to a direction and the adjoint `F'(x)*` applied to a data-space
//! element. The derivative and adjoint must actually be adjoint with
//! respect to the discrete inner products of [`crate::grid`]; the dot
//! test in each problem's test suite enforces this to near machine
//! precision, because the whole flow analysis silently assumes it.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::grid::{GridSpec, GridVector};

/// Failure modes shared by the benchmark operators.
#[derive(Debug, Error)]
pub enum ProblemError {
    /// The parameter left the operator's admissible set.
    #[error("parameter out of admissible set: node {index} has value {value:.6e}, needs > 0")]
    NonPositiveParameter { index: usize, value: f64 },
    /// An iterative linear solve did not reach its tolerance.
    #[error(
        "linear solver stalled at relative residual {achieved:.3e} \
         (target {target:.3e}) after {iterations} iterations"
    )]
    SolverStall { achieved: f64, target: f64, iterations: usize },
    /// A non-finite value appeared where a finite one was required.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
}

/// A forward operator with derivative and adjoint actions.
///
/// Implementations must be deterministic (same input, same output) and
/// callable from many threads at once; the ensemble integrator applies
/// them to all particles concurrently.
pub trait ForwardProblem: Sync {
    /// Grid of the unknown parameter.
    fn param_grid(&self) -> &GridSpec;

    /// Grid of the observed data.
    fn data_grid(&self) -> &GridSpec;

    /// Evaluates `F(x)`.
    fn apply(&self, x: &GridVector) -> Result<GridVector, ProblemError>;

    /// Evaluates `F'(x) q` for a parameter-space direction `q`.
    fn derivative_apply(&self, x: &GridVector, q: &GridVector) -> Result<GridVector, ProblemError>;

    /// Evaluates `F'(x)* w` for a data-space element `w`.
    fn adjoint_apply(&self, x: &GridVector, w: &GridVector) -> Result<GridVector, ProblemError>;

    /// Same as [`adjoint_apply`](Self::adjoint_apply) when `F(x)` is
    /// already known. Problems whose adjoint reuses state from the
    /// forward solve override this to skip recomputing it; the default
    /// ignores the hint.
    fn adjoint_apply_with_forward(
        &self,
        x: &GridVector,
        fx: &GridVector,
        w: &GridVector,
    ) -> Result<GridVector, ProblemError> {
        let _ = fx;
        self.adjoint_apply(x, w)
    }

    /// Pulls a freshly updated parameter back into the admissible set,
    /// returning how many nodes were adjusted. The default is the
    /// identity (no constraint).
    fn project(&self, x: &mut GridVector) -> u64 {
        let _ = x;
        0
    }
}

/// Estimates `||F'(x)||` by power iteration on `F'(x)* F'(x)`.
///
/// Starts from a random unit direction drawn from `rng` and returns the
/// square root of the final Rayleigh quotient. The estimate approaches the
/// true norm from below; a few dozen iterations give plenty of accuracy
/// for step-size calibration, which is the intended use.
pub fn operator_norm_estimate<P: ForwardProblem + ?Sized>(
    problem: &P,
    x: &GridVector,
    iterations: usize,
    rng: &mut impl Rng,
) -> Result<f64, ProblemError> {
    let mut v = GridVector::zeros(problem.param_grid());
    for val in v.values_mut() {
        *val = rng.sample(StandardNormal);
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    v.scale(1.0 / norm);
    let mut rayleigh: f64 = 0.0;
    for _ in 0..iterations {
        let gv = problem.adjoint_apply(x, &problem.derivative_apply(x, &v)?)?;
        rayleigh = v.inner(&gv);
        let gn = gv.norm();
        if gn == 0.0 {
            return Ok(0.0);
        }
        v = &gv * (1.0 / gn);
    }
    Ok(rayleigh.max(0.0).sqrt())
}
