//! Increment sampling for the grid-valued Q-Wiener process driving the
//! flow, and the counter-based RNG streams that keep parallel runs
//! reproducible.
//!
//! An increment over a step of length `dt` is
//!
//! ```text
//!     dB = sqrt(dt) * sum_{j=1..J} sqrt(lambda_j) * phi_j * xi_j,
//! ```
//!
//! with `xi_j` i.i.d. standard normal and `(lambda_j, phi_j)` the
//! eigenpairs of the covariance operator. Two covariances are supported:
//! the identity (every node value an independent `N(0, dt)` draw, the
//! discretized convention for `Q = I`) and a trace-class
//! eigenvalue-decay family `lambda_j = j^{-beta}`, `beta > 1`, truncated
//! at `J` modes, in either the coordinate basis or a smooth discrete
//! cosine basis.
//!
//! # Reproducibility
//!
//! Every consumer draws from a [`RngStream`], which maps a master seed
//! plus a `(lane, counter)` pair (particle index and step index in the
//! integrator) to an independent ChaCha stream. The mapping is pure, so
//! any particle's noise at any step can be regenerated in isolation and
//! results do not depend on thread scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::grid::{GridSpec, GridVector};

/// Invalid covariance configurations.
#[derive(Debug, Error, PartialEq)]
pub enum WienerError {
    #[error("eigenvalue decay exponent must exceed 1 for a trace-class covariance, got {beta}")]
    DecayTooSlow { beta: f64 },
    #[error("truncation must keep at least one mode")]
    EmptyTruncation,
    #[error("truncation {truncation} exceeds the {nodes} grid nodes")]
    TruncationExceedsGrid { truncation: usize, nodes: usize },
}

/// Eigenbasis used by the decaying covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenBasis {
    /// Mode `j` is the `j`-th node indicator; increments live on the
    /// first `J` nodes.
    Coordinate,
    /// Discrete cosine modes (the Neumann-compatible eigenvectors of the
    /// mirror Laplacian), normalized to unit grid norm; increments are
    /// smooth functions. In 2D, tensor modes ordered by increasing total
    /// frequency `kx² + ky²` (ties broken by smaller `kx`).
    Cosine,
}

/// Covariance operator of the driving Wiener process.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceSpec {
    /// Independent `N(0,1)` per node, scaled by `sqrt(dt)`.
    Identity,
    /// `lambda_j = j^{-beta}` over the first `truncation` modes of
    /// `basis`.
    EigenDecay { beta: f64, truncation: usize, basis: EigenBasis },
}

impl CovarianceSpec {
    /// Checks the spec against a grid: decay exponent above 1, at least
    /// one mode, no more modes than nodes.
    pub fn validate(&self, grid: &GridSpec) -> Result<(), WienerError> {
        match *self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::EigenDecay { beta, truncation, .. } => {
                if !(beta > 1.0) {
                    return Err(WienerError::DecayTooSlow { beta });
                }
                if truncation == 0 {
                    return Err(WienerError::EmptyTruncation);
                }
                if truncation > grid.node_count() {
                    return Err(WienerError::TruncationExceedsGrid {
                        truncation,
                        nodes: grid.node_count(),
                    });
                }
                Ok(())
            }
        }
    }

    /// Expected squared grid norm of an increment per unit time,
    /// `E ||dB||² / dt`.
    ///
    /// For the identity covariance this is `h^dim * node_count` (each
    /// node contributes unit variance, weighted by the quadrature); for
    /// eigenvalue decay it is `sum_j lambda_j` times the squared norm of
    /// the basis vectors (`h^dim` for coordinate indicators, 1 for the
    /// normalized cosine modes).
    pub fn increment_variance(&self, grid: &GridSpec) -> f64 {
        match *self {
            CovarianceSpec::Identity => grid.node_weight() * grid.node_count() as f64,
            CovarianceSpec::EigenDecay { beta, truncation, basis } => {
                let trace: f64 = (1..=truncation).map(|j| (j as f64).powf(-beta)).sum();
                match basis {
                    EigenBasis::Coordinate => grid.node_weight() * trace,
                    EigenBasis::Cosine => trace,
                }
            }
        }
    }
}

/// Deterministic family of ChaCha streams indexed by `(lane, counter)`.
///
/// `lane` and `counter` must each fit in 32 bits; the integrator uses
/// (particle, step). Distinct purposes (flow noise, data synthesis,
/// source-element draws) should fork decorrelated families via
/// [`RngStream::with_domain`] so they never share a stream.
#[derive(Clone, Copy, Debug)]
pub struct RngStream {
    master: u64,
}

impl RngStream {
    /// Family rooted at `master_seed`.
    pub fn new(master_seed: u64) -> Self {
        Self { master: master_seed }
    }

    /// A decorrelated family for a distinct purpose tag.
    pub fn with_domain(&self, tag: u64) -> Self {
        Self { master: splitmix64(self.master ^ splitmix64(tag)) }
    }

    /// The generator for `(lane, counter)`.
    ///
    /// # Panics
    ///
    /// Panics if either index needs more than 32 bits.
    pub fn rng(&self, lane: u64, counter: u64) -> ChaCha8Rng {
        assert!(lane < (1 << 32), "lane {lane} exceeds 32 bits");
        assert!(counter < (1 << 32), "counter {counter} exceeds 32 bits");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream((lane << 32) | counter);
        rng
    }
}

/// One SplitMix64 output step; used only to decorrelate domain tags.
fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one increment `dB` over a step of length `dt`.
///
/// Normal draws are consumed in a fixed order (node order for the
/// identity covariance, mode order for eigenvalue decay), which is part
/// of the reproducibility contract.
pub fn sample_increment(
    cov: &CovarianceSpec,
    dt: f64,
    grid: &GridSpec,
    rng: &mut impl Rng,
) -> Result<GridVector, WienerError> {
    assert!(dt > 0.0, "step length must be positive, got {dt}");
    cov.validate(grid)?;
    let sqrt_dt = dt.sqrt();
    let mut out = GridVector::zeros(grid);
    match *cov {
        CovarianceSpec::Identity => {
            for v in out.values_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *v = sqrt_dt * xi;
            }
        }
        CovarianceSpec::EigenDecay { beta, truncation, basis: EigenBasis::Coordinate } => {
            for j in 0..truncation {
                let lambda = ((j + 1) as f64).powf(-beta);
                let xi: f64 = rng.sample(StandardNormal);
                out[j] = sqrt_dt * lambda.sqrt() * xi;
            }
        }
        CovarianceSpec::EigenDecay { beta, truncation, basis: EigenBasis::Cosine } => {
            for (j, mode) in cosine_modes(grid).take(truncation).enumerate() {
                let lambda = ((j + 1) as f64).powf(-beta);
                let xi: f64 = rng.sample(StandardNormal);
                let coeff = sqrt_dt * lambda.sqrt() * xi;
                accumulate_cosine_mode(&mut out, grid, mode, coeff);
            }
        }
    }
    Ok(out)
}

/// Frequency pairs `(kx, ky)` of the cosine modes in sampling order
/// (`ky = 0` throughout in 1D).
fn cosine_modes(grid: &GridSpec) -> impl Iterator<Item = (usize, usize)> {
    let n = grid.n_per_axis();
    let mut modes: Vec<(usize, usize)> = match grid.dim() {
        1 => (0..n).map(|k| (k, 0)).collect(),
        _ => (0..n).flat_map(|ky| (0..n).map(move |kx| (kx, ky))).collect(),
    };
    modes.sort_by_key(|&(kx, ky)| (kx * kx + ky * ky, kx));
    modes.into_iter()
}

/// Adds `coeff` times the unit-norm cosine mode `(kx, ky)` to `out`.
fn accumulate_cosine_mode(out: &mut GridVector, grid: &GridSpec, (kx, ky): (usize, usize), coeff: f64) {
    let n = grid.n_per_axis();
    let denom = (n - 1) as f64;
    let axis = |k: usize, i: usize| (k as f64 * std::f64::consts::PI * i as f64 / denom).cos();
    match grid.dim() {
        1 => {
            let norm_sq: f64 =
                grid.node_weight() * (0..n).map(|i| axis(kx, i).powi(2)).sum::<f64>();
            let scale = coeff / norm_sq.sqrt();
            for (i, v) in out.values_mut().iter_mut().enumerate() {
                *v += scale * axis(kx, i);
            }
        }
        _ => {
            let col_sq = |k: usize| (0..n).map(|i| axis(k, i).powi(2)).sum::<f64>();
            let norm_sq = grid.node_weight() * col_sq(kx) * col_sq(ky);
            let scale = coeff / norm_sq.sqrt();
            for iy in 0..n {
                for ix in 0..n {
                    let idx = grid.index2(ix, iy);
                    out[idx] += scale * axis(kx, ix) * axis(ky, iy);
                }
            }
        }
    }
}
