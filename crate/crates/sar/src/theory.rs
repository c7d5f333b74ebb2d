//! Numerical companions to the convergence analysis: the explicit
//! constants chain, verifiable forms of the two auxiliary inequalities the
//! rate proof leans on, and an empirical probe of the nonlinearity
//! condition.
//!
//! Everything here is independent of the integrator. The constants are
//! evaluated exactly as written in their closed forms, with the error
//! budget `E` carried through unrounded; the inequalities are checked by
//! brute force (dense scan plus local refinement for the supremum,
//! adaptive Gauss-Kronrod quadrature for the integral); and the cone
//! probe samples finite differences of an actual operator. Agreement
//! between this module and the flow's behavior is evidence, not
//! assumption.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::grid::GridVector;
use crate::operator::{ForwardProblem, ProblemError};

/// Failure modes of the theory computations.
#[derive(Debug, Error)]
pub enum TheoryError {
    /// One or more parameters are outside their admissible ranges.
    #[error("invalid theory parameters: {}", violations.join("; "))]
    InvalidParams { violations: Vec<String> },
    /// The contraction factor `c1` reached 1, so the constants chain does
    /// not close and no finite error budget exists.
    #[error("constants chain does not close: c1 = {c1} must stay below 1")]
    ChainDoesNotClose { c1: f64 },
    /// The decay exponents of the integral bound sum to at most 1, where
    /// the bounded quantity itself diverges.
    #[error("exponent sum k + j = {sum} must exceed 1")]
    ExponentSumTooSmall { sum: f64 },
    /// Adaptive quadrature ran out of subdivisions before reaching its
    /// tolerance.
    #[error("quadrature stalled at relative error {achieved:.3e} (target {target:.3e})")]
    QuadratureFailure { achieved: f64, target: f64 },
    /// The forward operator failed while probing the cone condition.
    #[error("forward problem failed during cone probe")]
    Problem(#[from] ProblemError),
    /// Every sampled pair had a degenerate denominator, so no cone ratio
    /// could be formed.
    #[error("cone probe degenerate: all {samples} sampled pairs had negligible residual difference")]
    DegenerateCone { samples: usize },
}

/// Parameters of the convergence analysis.
///
/// `gamma` is the spectral smoothness index of the source condition,
/// `sigma` the exponent of an optional time weight in the noise profile
/// (`0` for the plain profile used by the flow), and `c_r` the constant
/// from the range invariance assumption. The rest match [`crate::flow`]:
/// `eta` allows for nonlinearity, `eps0` budgets the noise, `tau` is the
/// discrepancy factor, and `delta0` the reference noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub eta: f64,
    pub delta0: f64,
    pub gamma: f64,
    pub c_r: f64,
    pub eps0: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl Default for TheoryParams {
    /// The reference parameter point at which the constants table is
    /// usually quoted.
    fn default() -> Self {
        Self {
            eta: 0.5,
            delta0: 1.0,
            gamma: 1.0 / 3.0,
            c_r: 1.0,
            eps0: 1.0,
            tau: 6.0,
            sigma: 0.0,
        }
    }
}

impl TheoryParams {
    /// Admissible range of `eps0` for this `eta`: the interval on which a
    /// convergence rate is available. Its lower end is where the
    /// `tau`-threshold crosses `sqrt(2)`, below which the chain would ask
    /// for `tau^2 < 2`.
    pub fn eps0_range(&self) -> (f64, f64) {
        let lower = ((2.0 - 2.0_f64.sqrt()) / self.eta - (2.0 + 2.0_f64.sqrt())).max(0.0);
        let upper = 2.0 * (1.0 / self.eta - 1.0);
        (lower, upper)
    }

    /// Smallest admissible discrepancy factor for this `(eta, eps0)`.
    pub fn tau_threshold(&self) -> f64 {
        (2.0 + 2.0 * self.eta) / (2.0 - (2.0 + self.eps0) * self.eta)
    }

    /// Checks every parameter against its admissible range, returning one
    /// message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let eta_ok = self.eta > 0.0 && self.eta < 1.0;
        if !eta_ok {
            v.push(format!("eta = {} must lie strictly between 0 and 1", self.eta));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            v.push(format!("delta0 = {} must be positive and finite", self.delta0));
        }
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            v.push(format!("gamma = {} must lie in (0, 1/2]", self.gamma));
        }
        if !(self.c_r >= 0.0 && self.c_r.is_finite()) {
            v.push(format!("c_R = {} must be nonnegative and finite", self.c_r));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            v.push(format!("sigma = {} must be nonnegative and finite", self.sigma));
        }
        let mut eps0_ok = false;
        if eta_ok {
            let (lo, hi) = self.eps0_range();
            eps0_ok = self.eps0 > lo && self.eps0 < hi;
            if !eps0_ok {
                v.push(format!(
                    "eps0 = {} must lie in ({:.7}, {:.7}) for eta = {}",
                    self.eps0, lo, hi, self.eta
                ));
            }
        } else if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            v.push(format!("eps0 = {} must be positive and finite", self.eps0));
        }
        if eta_ok && eps0_ok {
            let threshold = self.tau_threshold();
            // The threshold itself is admissible here: the rate analysis
            // is stated at tau >= threshold, unlike the live stopping
            // rule, which needs strict slack to make progress.
            if !(self.tau >= threshold) {
                v.push(format!(
                    "tau = {} must be at least {:.7} for eta = {}, eps0 = {}",
                    self.tau, threshold, self.eta, self.eps0
                ));
            }
            if !(self.tau * self.tau > 2.0) {
                v.push(format!("tau = {} must satisfy tau^2 > 2", self.tau));
            }
        }
        v
    }
}

/// The closed constants chain, evaluated at one parameter point.
///
/// Field order follows the dependency order of the chain; `e_max` is the
/// largest admissible source norm and `ce` the constant in front of the
/// final convergence rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsTable {
    pub g0: f64,
    pub tau_threshold: f64,
    pub c_gamma: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_big_gamma: f64,
    pub c_star: f64,
    pub e_max: f64,
    pub ce0: f64,
    pub ce1: f64,
    pub ce2: f64,
    pub ce3: f64,
    pub ce4: f64,
    pub ce: f64,
}

/// One row of the rendered constants table.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRow {
    pub name: &'static str,
    pub value: f64,
    pub formula: &'static str,
}

impl ConstantsTable {
    /// The table in presentation order, each entry with its defining
    /// formula.
    pub fn rows(&self) -> Vec<ConstantRow> {
        vec![
            ConstantRow { name: "g0", value: self.g0, formula: "sqrt(eps0 eta) / delta0" },
            ConstantRow {
                name: "tau_threshold",
                value: self.tau_threshold,
                formula: "(2 + 2 eta) / (2 - (2 + eps0) eta)",
            },
            ConstantRow { name: "c_gamma", value: self.c_gamma, formula: "max{gamma^gamma, 1}" },
            ConstantRow {
                name: "c_a",
                value: self.c_a,
                formula: "max{(gamma + sigma)^(gamma + sigma), 1}",
            },
            ConstantRow {
                name: "c_b",
                value: self.c_b,
                formula: "max{(gamma + 1/2)^(gamma + 1/2), 1}",
            },
            ConstantRow {
                name: "c0",
                value: self.c0,
                formula: "c_R (sqrt(2) tau / (sqrt(tau^2 - 2) (1 - eta)) + 1/2)",
            },
            ConstantRow {
                name: "c1",
                value: self.c1,
                formula: "sqrt(2) c_b / ((1 - eta) sqrt(tau^2 - 2))",
            },
            ConstantRow { name: "c2", value: self.c2, formula: "c_b c0" },
            ConstantRow {
                name: "c3",
                value: self.c3,
                formula: "sqrt(2 tau^2 eps0 eta / ((1 - eta)^2 (tau^2 - 2)))",
            },
            ConstantRow {
                name: "c_Gamma",
                value: self.c_big_gamma,
                formula: "max{(4^gamma - 1) / gamma, (2^(2 gamma + 5/2) - 4) / (4 gamma + 1)}",
            },
            ConstantRow {
                name: "c_star",
                value: self.c_star,
                formula: "2 c_b (1 + sqrt(c_Gamma) c3) / (1 - c1)",
            },
            ConstantRow {
                name: "E_max",
                value: self.e_max,
                formula: "(1 - c1) / (2 c2 c_Gamma c_star)",
            },
            ConstantRow {
                name: "ce0",
                value: self.ce0,
                formula: "(c_star E g0 sqrt((2^(2 gamma + 3) - 4) / (2 gamma + 1)) / (1 - eta) \
                          + 2 g0 delta0 / (1 - eta)) q^(1/(4 gamma + 2)), \
                          q = 2 c_star^2 / ((1 - eta)^2 (tau^2 - 2))",
            },
            ConstantRow {
                name: "ce1",
                value: self.ce1,
                formula: "1 + c0 c_star^2 E (2^(gamma + 1) - 2) / gamma",
            },
            ConstantRow { name: "ce2", value: self.ce2, formula: "(1 + eta) (tau + 1) + 1" },
            ConstantRow {
                name: "ce3",
                value: self.ce3,
                formula: "ce1^(1/(2 gamma + 1)) ce2^(2 gamma / (2 gamma + 1))",
            },
            ConstantRow {
                name: "ce4",
                value: self.ce4,
                formula: "q^(1/(4 gamma + 2)) + ce3, q as in ce0",
            },
            ConstantRow { name: "ce", value: self.ce, formula: "sqrt(ce0^2 + ce4^2)" },
        ]
    }
}

/// Evaluates the full constants chain at `params`.
///
/// The chain is evaluated left to right with no intermediate rounding; in
/// particular the error budget `E = e_max` feeds `ce0` and `ce1` at full
/// precision, where rounding it first would visibly shift the final
/// constants.
pub fn constants_table(params: &TheoryParams) -> Result<ConstantsTable, TheoryError> {
    let violations = params.validate();
    if !violations.is_empty() {
        return Err(TheoryError::InvalidParams { violations });
    }
    let TheoryParams { eta, delta0, gamma, c_r, eps0, tau, sigma } = *params;

    let g0 = (eps0 * eta).sqrt() / delta0;
    let tau_threshold = params.tau_threshold();
    let c_gamma = gamma.powf(gamma).max(1.0);
    let c_a = (gamma + sigma).powf(gamma + sigma).max(1.0);
    let c_b = (gamma + 0.5).powf(gamma + 0.5).max(1.0);

    let tau_gap = (tau * tau - 2.0).sqrt();
    let one_m_eta = 1.0 - eta;
    let c0 = c_r * (2.0_f64.sqrt() * tau / (tau_gap * one_m_eta) + 0.5);
    let c1 = 2.0_f64.sqrt() * c_b / (one_m_eta * tau_gap);
    if !(c1 < 1.0) {
        return Err(TheoryError::ChainDoesNotClose { c1 });
    }
    let c2 = c_b * c0;
    let c3 = (2.0 * tau * tau * eps0 * eta / (one_m_eta * one_m_eta * (tau * tau - 2.0))).sqrt();
    let c_big_gamma = ((4.0_f64.powf(gamma) - 1.0) / gamma)
        .max((2.0_f64.powf(2.0 * gamma + 2.5) - 4.0) / (4.0 * gamma + 1.0));
    let c_star = 2.0 * c_b * (1.0 + c_big_gamma.sqrt() * c3) / (1.0 - c1);
    let e_max = (1.0 - c1) / (2.0 * c2 * c_big_gamma * c_star);

    let q = 2.0 * c_star * c_star / (one_m_eta * one_m_eta * (tau * tau - 2.0));
    let q_pow = q.powf(1.0 / (4.0 * gamma + 2.0));
    let ce0 = (c_star * e_max * g0 / one_m_eta
        * ((2.0_f64.powf(2.0 * gamma + 3.0) - 4.0) / (2.0 * gamma + 1.0)).sqrt()
        + 2.0 * g0 * delta0 / one_m_eta)
        * q_pow;
    let ce1 = 1.0 + c0 * c_star * c_star * e_max * (2.0_f64.powf(gamma + 1.0) - 2.0) / gamma;
    let ce2 = (1.0 + eta) * (tau + 1.0) + 1.0;
    let ce3 = ce1.powf(1.0 / (2.0 * gamma + 1.0)) * ce2.powf(2.0 * gamma / (2.0 * gamma + 1.0));
    let ce4 = q_pow + ce3;
    let ce = ce0.hypot(ce4);

    Ok(ConstantsTable {
        g0,
        tau_threshold,
        c_gamma,
        c_a,
        c_b,
        c0,
        c1,
        c2,
        c3,
        c_big_gamma,
        c_star,
        e_max,
        ce0,
        ce1,
        ce2,
        ce3,
        ce4,
        ce,
    })
}

/// Result of checking `sup_{0 <= lambda <= 1} lambda^gamma exp(-lambda t)`
/// against its envelope `max{gamma^gamma, 1} / (1 + t)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupBound {
    /// The numerically located supremum.
    pub sup: f64,
    /// Where it is attained.
    pub at: f64,
    /// The claimed envelope at this `(gamma, t)`.
    pub bound: f64,
    /// Whether `sup <= bound` held (up to roundoff slack).
    pub holds: bool,
}

/// Locates `sup_{0 <= lambda <= 1} lambda^gamma exp(-lambda t)` by a dense
/// million-point scan refined around the stationary point
/// `lambda = min(gamma / t, 1)`, and compares it against the envelope
/// `max{gamma^gamma, 1} / (1 + t)^gamma`.
///
/// Requires `gamma >= 0` and `t >= 0`. The scan parallelizes across
/// available threads with a deterministic reduction.
pub fn sup_bound(gamma: f64, t: f64) -> SupBound {
    assert!(gamma >= 0.0 && gamma.is_finite(), "gamma must be nonnegative");
    assert!(t >= 0.0 && t.is_finite(), "t must be nonnegative");
    const GRID: usize = 1_000_000;
    let f = move |lam: f64| -> f64 {
        if lam <= 0.0 {
            if gamma == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (gamma * lam.ln() - lam * t).exp()
        }
    };

    let denom = (GRID - 1) as f64;
    let (mut sup, mut at) = (0..GRID)
        .into_par_iter()
        .map(|i| {
            let lam = i as f64 / denom;
            (f(lam), lam)
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    if gamma > 0.0 {
        let crit = if t > 0.0 { (gamma / t).min(1.0) } else { 1.0 };
        let fc = f(crit);
        if fc > sup {
            sup = fc;
            at = crit;
        }
        let cell = 1.0 / denom;
        let (gl, gv) = golden_max(&f, (at - cell).max(0.0), (at + cell).min(1.0), 200);
        if gv > sup {
            sup = gv;
            at = gl;
        }
    }

    let bound = gamma.powf(gamma).max(1.0) / (1.0 + t).powf(gamma);
    SupBound { sup, at, bound, holds: sup <= bound * (1.0 + 1e-12) }
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Result of checking the weighted time-convolution integral against its
/// closed-form envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralBound {
    /// The integral, computed by adaptive quadrature.
    pub integral: f64,
    /// The envelope `(2^(k+j) - 2) / (k + j - 1) * (1 + t)^(1 - k - j)`.
    pub bound: f64,
    /// Whether `integral < bound` held.
    pub holds: bool,
}

/// Evaluates `int_0^t (1 + t - s)^(-k) (1 + s)^(-j) ds` by adaptive
/// Gauss-Kronrod quadrature and compares it against the envelope
/// `(2^(k+j) - 2) / (k + j - 1) * (1 + t)^(1 - k - j)`.
///
/// Requires `k, j >= 0`, `t >= 0`, and `k + j > 1` (otherwise the envelope
/// itself is meaningless and an error is returned). The quadrature aims at
/// a relative error of `1e-12`, well inside the `1e-10` the comparisons
/// here care about.
pub fn lemma_integral_bound(k: f64, j: f64, t: f64) -> Result<IntegralBound, TheoryError> {
    assert!(k >= 0.0 && k.is_finite(), "k must be nonnegative");
    assert!(j >= 0.0 && j.is_finite(), "j must be nonnegative");
    assert!(t >= 0.0 && t.is_finite(), "t must be nonnegative");
    let sum = k + j;
    if !(sum > 1.0) {
        return Err(TheoryError::ExponentSumTooSmall { sum });
    }
    let bound = (2.0_f64.powf(sum) - 2.0) / (sum - 1.0) * (1.0 + t).powf(1.0 - sum);
    let integrand = move |s: f64| (1.0 + t - s).powf(-k) * (1.0 + s).powf(-j);
    let integral = adaptive_gk(&integrand, 0.0, t, 1e-12, 4000)?;
    Ok(IntegralBound { integral, bound, holds: integral < bound })
}

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1]; the four Gauss nodes
// sit at the odd-indexed Kronrod positions plus the center.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod panel: returns the Kronrod value and the
/// Gauss-Kronrod difference as an error indicator.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = XGK[i] * h;
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

/// Globally adaptive quadrature: repeatedly bisects the panel with the
/// largest error indicator until the summed indicators drop below
/// `rel_tol` times the integral.
fn adaptive_gk(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64, TheoryError> {
    if a == b {
        return Ok(0.0);
    }
    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    }
    let (value, error) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, value, error }];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let target = rel_tol * total.abs().max(f64::MIN_POSITIVE);
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(TheoryError::QuadratureFailure {
                achieved: err / total.abs().max(f64::MIN_POSITIVE),
                target: rel_tol,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let Panel { a: pa, b: pb, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(f, pa, mid);
        let (v2, e2) = gk15(f, mid, pb);
        panels.push(Panel { a: pa, b: mid, value: v1, error: e1 });
        panels.push(Panel { a: mid, b: pb, value: v2, error: e2 });
    }
}

/// Result of the empirical nonlinearity probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeEstimate {
    /// Largest observed ratio of linearization remainder to residual
    /// difference.
    pub eta_hat: f64,
    /// Pairs actually measured.
    pub used: usize,
    /// Pairs skipped because the two residuals nearly coincided.
    pub skipped: usize,
}

/// Estimates the nonlinearity coefficient of `problem` on a ball around
/// `center`: samples pairs `(x, x~)` and maximizes
///
/// ```text
/// || F(x~) - F(x) - F'(x)(x~ - x) ||  /  || F(x) - F(x~) || .
/// ```
///
/// Points are drawn with isotropic Gaussian direction and uniform radius
/// within `radius`. Pairs whose residual difference is negligible are
/// skipped (they carry no information about the ratio); if every pair is
/// skipped an error is returned. The caller is responsible for choosing
/// `center` and `radius` inside the operator's admissible set.
///
/// The result is a lower bound on the true coefficient over the ball, to
/// be read as evidence, not as a verified theorem.
pub fn tangential_cone_estimate<P: ForwardProblem + ?Sized>(
    problem: &P,
    center: &GridVector,
    radius: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<ConeEstimate, TheoryError> {
    assert!(radius > 0.0 && radius.is_finite(), "radius must be positive");
    assert!(samples >= 1, "need at least one sample pair");
    let draw = |rng: &mut dyn rand::RngCore| -> GridVector {
        let mut dir = GridVector::zeros(center.grid());
        for v in dir.values_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = dir.norm();
        let r = radius * rng.random::<f64>();
        let mut x = center.clone();
        if norm > 0.0 {
            x.axpy(r / norm, &dir);
        }
        x
    };
    let mut eta_hat = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for _ in 0..samples {
        let x = draw(rng);
        let x_tilde = draw(rng);
        let fx = problem.apply(&x)?;
        let fxt = problem.apply(&x_tilde)?;
        let diff = &x_tilde - &x;
        let lin = problem.derivative_apply(&x, &diff)?;
        let denom = fx.distance(&fxt);
        if denom <= 1e-14 * (1.0 + fx.norm()) {
            skipped += 1;
            continue;
        }
        let mut num_sq = 0.0;
        let h = fx.grid().node_weight();
        for i in 0..fx.len() {
            let r = fxt[i] - fx[i] - lin[i];
            num_sq += h * r * r;
        }
        let ratio = num_sq.sqrt() / denom;
        if ratio > eta_hat {
            eta_hat = ratio;
        }
        used += 1;
    }
    if used == 0 {
        return Err(TheoryError::DegenerateCone { samples });
    }
    Ok(ConeEstimate { eta_hat, used, skipped })
}
