//! The stochastic regularizing flow and its time integrator.
//!
//! An ensemble of particles, all started at the initial guess `x_bar`,
//! evolves under the Euler-Maruyama scheme
//!
//! ```text
//! x_{k+1} = x_k + dt F'(x_k)* (y_delta - F(x_k)) + f_k dB_k ,
//! f_k = r_k theta / sqrt(1 + t_k) ,
//! ```
//!
//! where `r_k` is the ensemble root-mean-square residual and `dB_k` an
//! independent Wiener increment per particle. The drift alone (`theta = 0`)
//! is the classical gradient flow for the output least-squares functional;
//! the noise term keeps the ensemble exploring at an amplitude that is
//! tied to the residual, so it dies out exactly when the data has been
//! explained. A run terminates at the discrepancy stopping index, the
//! first `k` with `r_k^2 < tau^2 delta^2`, or at the step cap.
//!
//! All randomness derives from `master_seed` through counter-addressed
//! streams: particle `i` at step `k` always draws from the same stream
//! regardless of thread count, so runs are reproducible to the bit.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::GridVector;
use crate::operator::{ForwardProblem, ProblemError};
use crate::wiener::{sample_increment, CovarianceSpec, RngStream, WienerError};

/// Domain tag separating the flow's noise draws from any other use of the
/// same master seed.
const NOISE_DOMAIN: u64 = 0x464c_4f57;

/// Particle norms beyond `RUNAWAY_FACTOR * (1 + ||x_bar||)` are treated as
/// divergence of the time integration.
const RUNAWAY_FACTOR: f64 = 1e6;

/// Tunable parameters of a flow run.
#[derive(Debug, Clone, PartialEq)]
pub struct SarConfig {
    /// Euler step size.
    pub dt: f64,
    /// Noise gain; `0` gives the deterministic gradient flow.
    pub theta: f64,
    /// Number of particles.
    pub ensemble_size: usize,
    /// Discrepancy factor in the stopping rule `r < tau delta`.
    pub tau: f64,
    /// Noise-budget parameter; together with `eta` it caps `theta`.
    pub eps0: f64,
    /// Nonlinearity allowance in `(0, 1)`.
    pub eta: f64,
    /// Reference noise level used when calibrating `theta`.
    pub delta0: f64,
    /// Noise level of the data at hand (`0` for clean data).
    pub delta: f64,
    /// Hard cap on the number of steps.
    pub max_steps: u64,
    /// Spatial covariance of the driving noise.
    pub cov: CovarianceSpec,
    /// Seed from which every random draw of the run derives.
    pub master_seed: u64,
}

impl Default for SarConfig {
    fn default() -> Self {
        Self {
            dt: 0.5,
            theta: 0.0,
            ensemble_size: 1,
            tau: 6.5,
            eps0: 1.0,
            eta: 0.5,
            delta0: 1.0,
            delta: 0.0,
            max_steps: 100_000,
            cov: CovarianceSpec::Identity,
            master_seed: 0,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The discrepancy stopping rule fired.
    Stopped,
    /// The step cap was reached first.
    MaxSteps,
    /// The initial residual already sits at or below `tau delta`, so the
    /// data carries no usable information beyond the initial guess.
    PreconditionFailed,
}

/// Failure modes of the integrator.
#[derive(Debug, Error)]
pub enum FlowError {
    /// One or more configuration values are outside their admissible
    /// ranges; each violation is spelled out.
    #[error("invalid flow parameters: {}", violations.join("; "))]
    InvalidParams { violations: Vec<String> },
    /// The noise covariance does not fit the parameter grid.
    #[error("invalid noise covariance")]
    Covariance(#[from] WienerError),
    /// The forward operator failed mid-run.
    #[error("forward problem failed at step {step}")]
    Problem {
        step: u64,
        #[source]
        source: ProblemError,
    },
    /// A particle left the trust region around the initial guess or turned
    /// non-finite; the step size is too large for the problem.
    #[error("ensemble diverged at step {step}: a particle norm passed the runaway guard")]
    Divergence { step: u64 },
}

/// Checks every configuration value against its admissible range and
/// returns one message per violation; an empty list means the
/// configuration is usable.
pub fn validate_params(cfg: &SarConfig) -> Vec<String> {
    let mut v = Vec::new();
    let eta_ok = cfg.eta > 0.0 && cfg.eta < 1.0;
    if !eta_ok {
        v.push(format!("eta = {} must lie strictly between 0 and 1", cfg.eta));
    }
    let delta0_ok = cfg.delta0 > 0.0 && cfg.delta0.is_finite();
    if !delta0_ok {
        v.push(format!("delta0 = {} must be positive and finite", cfg.delta0));
    }
    let mut eps0_ok = cfg.eps0 > 0.0 && cfg.eps0.is_finite();
    if eta_ok {
        let upper = 2.0 * (1.0 / cfg.eta - 1.0);
        eps0_ok = eps0_ok && cfg.eps0 < upper;
        if !eps0_ok {
            v.push(format!(
                "epsilon0 = {} must lie in (0, {:.7}) for eta = {}",
                cfg.eps0, upper, cfg.eta
            ));
        }
    } else if !eps0_ok {
        v.push(format!("epsilon0 = {} must be positive and finite", cfg.eps0));
    }
    if eta_ok && eps0_ok {
        let threshold = (2.0 + 2.0 * cfg.eta) / (2.0 - (2.0 + cfg.eps0) * cfg.eta);
        if !(cfg.tau > threshold) {
            v.push(format!(
                "tau = {} must exceed {:.7} for eta = {}, epsilon0 = {}",
                cfg.tau, threshold, cfg.eta, cfg.eps0
            ));
        }
    }
    if eta_ok && eps0_ok && delta0_ok {
        let bound = (cfg.eps0 * cfg.eta).sqrt() / cfg.delta0;
        if !(cfg.theta >= 0.0 && cfg.theta <= bound) {
            v.push(format!("theta = {} must lie in [0, {:.7}]", cfg.theta, bound));
        }
    } else if !(cfg.theta >= 0.0 && cfg.theta.is_finite()) {
        v.push(format!("theta = {} must be nonnegative and finite", cfg.theta));
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        v.push(format!("dt = {} must be positive and finite", cfg.dt));
    }
    if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
        v.push(format!("delta = {} must be nonnegative and finite", cfg.delta));
    }
    if cfg.ensemble_size == 0 {
        v.push("ensemble_size must be at least 1".to_string());
    }
    if cfg.max_steps == 0 {
        v.push("max_steps must be at least 1".to_string());
    }
    v
}

/// Noise amplitude profile `theta / sqrt(1 + t)`.
///
/// The full noise coefficient is this profile times the current ensemble
/// residual; the decay in `t` is what lets the stochastic flow settle.
pub fn noise_scale(t: f64, theta: f64) -> f64 {
    theta / (1.0 + t).sqrt()
}

/// The discrepancy stopping rule: `true` once `rmsr^2 - tau^2 delta^2`
/// turns strictly negative. With `delta = 0` it never fires.
pub fn check_stop(rmsr: f64, cfg: &SarConfig) -> bool {
    rmsr * rmsr - cfg.tau * cfg.tau * cfg.delta * cfg.delta < 0.0
}

/// Root-mean-square data residual of an ensemble, recomputed from scratch.
pub fn ensemble_rmsr<P: ForwardProblem + ?Sized>(
    particles: &[GridVector],
    problem: &P,
    y_delta: &GridVector,
) -> Result<f64, ProblemError> {
    assert!(!particles.is_empty(), "rmsr of an empty ensemble");
    let mut acc = 0.0;
    for x in particles {
        let fx = problem.apply(x)?;
        let d = y_delta.distance(&fx);
        acc += d * d;
    }
    Ok((acc / particles.len() as f64).sqrt())
}

/// The evolving ensemble: particles, their cached forward values, and the
/// aggregate residual statistics at the current step.
pub struct EnsembleState {
    /// Particle positions.
    pub particles: Vec<GridVector>,
    /// `F(x_i)` for each particle, maintained by [`step`] so the residual
    /// and the adjoint reuse one solve.
    pub forwards: Vec<GridVector>,
    /// Steps taken so far.
    pub step: u64,
    /// Flow time `step * dt`.
    pub time: f64,
    /// Ensemble root-mean-square residual `r_k`.
    pub rmsr: f64,
    /// Standard error of `r_k` across the ensemble (delta method); zero
    /// while all particles coincide.
    pub rmsr_se: f64,
    /// The common starting point.
    pub x_bar: GridVector,
    guard: f64,
}

impl EnsembleState {
    /// Places `ensemble_size` particles at `x_bar` and evaluates the
    /// shared initial forward value once.
    pub fn new<P: ForwardProblem + ?Sized>(
        problem: &P,
        x_bar: &GridVector,
        y_delta: &GridVector,
        ensemble_size: usize,
    ) -> Result<Self, FlowError> {
        assert!(ensemble_size >= 1, "need at least one particle");
        let fx = problem
            .apply(x_bar)
            .map_err(|source| FlowError::Problem { step: 0, source })?;
        let rmsr = y_delta.distance(&fx);
        Ok(Self {
            particles: vec![x_bar.clone(); ensemble_size],
            forwards: vec![fx; ensemble_size],
            step: 0,
            time: 0.0,
            rmsr,
            rmsr_se: 0.0,
            x_bar: x_bar.clone(),
            guard: RUNAWAY_FACTOR * (1.0 + x_bar.norm()),
        })
    }
}

/// Advances the ensemble by one Euler-Maruyama step, refreshing the cached
/// forward values and residual statistics. Returns the number of nodes the
/// admissibility projection adjusted.
///
/// Particles are processed in parallel; particle `i` at step `k` draws
/// from stream `(i, k)` of `stream`, so the result does not depend on the
/// thread count. With `theta = 0` no random state is consumed at all.
pub fn step<P: ForwardProblem + ?Sized>(
    problem: &P,
    state: &mut EnsembleState,
    y_delta: &GridVector,
    cfg: &SarConfig,
    stream: &RngStream,
) -> Result<u64, FlowError> {
    let f_k = state.rmsr * noise_scale(state.time, cfg.theta);
    let next_step = state.step + 1;
    let guard = state.guard;
    let dt = cfg.dt;
    let grid = *problem.param_grid();

    let per_particle: Vec<Result<(f64, u64), FlowError>> = state
        .particles
        .par_iter_mut()
        .zip(state.forwards.par_iter_mut())
        .enumerate()
        .map(|(i, (x, fx))| {
            let omega = y_delta - &*fx;
            let update = problem
                .adjoint_apply_with_forward(x, fx, &omega)
                .map_err(|source| FlowError::Problem { step: next_step, source })?;
            x.axpy(dt, &update);
            if f_k > 0.0 {
                let mut rng = stream.rng(i as u64, state.step);
                let db = sample_increment(&cfg.cov, dt, &grid, &mut rng)?;
                x.axpy(f_k, &db);
            }
            let clipped = problem.project(x);
            if !x.all_finite() || x.norm() > guard {
                return Err(FlowError::Divergence { step: next_step });
            }
            *fx = problem
                .apply(x)
                .map_err(|source| FlowError::Problem { step: next_step, source })?;
            let d = y_delta.distance(fx);
            Ok((d * d, clipped))
        })
        .collect();

    let n = state.particles.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_sq_sq = 0.0;
    let mut clip_events = 0;
    for r in per_particle {
        let (res_sq, clipped) = r?;
        sum_sq += res_sq;
        sum_sq_sq += res_sq * res_sq;
        clip_events += clipped;
    }
    let mean_sq = sum_sq / n;
    state.rmsr = mean_sq.sqrt();
    // Delta method: se(r) = se(r^2) / (2 r), with the population variance
    // of the squared residuals over the ensemble.
    let var_sq = (sum_sq_sq / n - mean_sq * mean_sq).max(0.0);
    state.rmsr_se = if state.rmsr > 0.0 {
        (var_sq / n).sqrt() / (2.0 * state.rmsr)
    } else {
        0.0
    };
    state.step = next_step;
    state.time += dt;
    Ok(clip_events)
}

/// Complete history of a flow run.
///
/// Entry `k` of each series describes the ensemble after `k` steps, so the
/// series always starts with the initial state. `f` holds the noise
/// coefficient `f_k` that would drive (or drove) step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Flow times `t_k`.
    pub t: Vec<f64>,
    /// Ensemble root-mean-square residuals `r_k`.
    pub rmsr: Vec<f64>,
    /// Ensemble standard errors of `r_k`.
    pub rmsr_se: Vec<f64>,
    /// Root-mean-square errors against the ground truth, when one was
    /// supplied.
    pub rmse: Option<Vec<f64>>,
    /// Noise coefficients `f_k = r_k theta / sqrt(1 + t_k)`.
    pub f: Vec<f64>,
    /// Total number of nodes the admissibility projection adjusted.
    pub clip_events: u64,
    /// How the run ended.
    pub termination: Termination,
    /// Stopping index `k*`, when the discrepancy rule fired.
    pub stop_step: Option<u64>,
    /// Flow time at the stopping index.
    pub stop_time: Option<f64>,
    /// The ensemble at termination.
    pub final_ensemble: Vec<GridVector>,
}

/// Runs the flow from `x_bar` until the discrepancy rule fires or
/// `max_steps` is exhausted.
///
/// `truth` is optional and only feeds the diagnostic error series; the
/// iteration itself never looks at it. The stopping rule compares the
/// ensemble residual against `tau * delta` with the `delta` from `cfg`,
/// and refuses to start (termination [`Termination::PreconditionFailed`])
/// if even the initial guess already satisfies it.
pub fn run<P: ForwardProblem + ?Sized>(
    problem: &P,
    x_bar: &GridVector,
    truth: Option<&GridVector>,
    y_delta: &GridVector,
    cfg: &SarConfig,
) -> Result<RunRecord, FlowError> {
    let violations = validate_params(cfg);
    if !violations.is_empty() {
        return Err(FlowError::InvalidParams { violations });
    }
    cfg.cov.validate(problem.param_grid())?;

    let stream = RngStream::new(cfg.master_seed).with_domain(NOISE_DOMAIN);
    let mut state = EnsembleState::new(problem, x_bar, y_delta, cfg.ensemble_size)?;
    let mut record = RunRecord {
        t: Vec::new(),
        rmsr: Vec::new(),
        rmsr_se: Vec::new(),
        rmse: truth.map(|_| Vec::new()),
        f: Vec::new(),
        clip_events: 0,
        termination: Termination::MaxSteps,
        stop_step: None,
        stop_time: None,
        final_ensemble: Vec::new(),
    };
    push_row(&mut record, &state, truth, cfg);

    if !(state.rmsr > cfg.tau * cfg.delta) {
        record.termination = Termination::PreconditionFailed;
        record.final_ensemble = state.particles;
        return Ok(record);
    }

    loop {
        if check_stop(state.rmsr, cfg) {
            record.termination = Termination::Stopped;
            record.stop_step = Some(state.step);
            record.stop_time = Some(state.time);
            break;
        }
        if state.step >= cfg.max_steps {
            record.termination = Termination::MaxSteps;
            break;
        }
        record.clip_events += step(problem, &mut state, y_delta, cfg, &stream)?;
        push_row(&mut record, &state, truth, cfg);
    }
    record.final_ensemble = state.particles;
    Ok(record)
}

fn push_row(record: &mut RunRecord, state: &EnsembleState, truth: Option<&GridVector>, cfg: &SarConfig) {
    record.t.push(state.time);
    record.rmsr.push(state.rmsr);
    record.rmsr_se.push(state.rmsr_se);
    record.f.push(state.rmsr * noise_scale(state.time, cfg.theta));
    if let (Some(series), Some(truth)) = (record.rmse.as_mut(), truth) {
        let mut acc = 0.0;
        for x in &state.particles {
            let d = x.distance(truth);
            acc += d * d;
        }
        series.push((acc / state.particles.len() as f64).sqrt());
    }
}
