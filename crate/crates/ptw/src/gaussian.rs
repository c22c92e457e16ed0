//! Exact finite-dimensional laws of the `(κ, θ)` sub-process.
//!
//! Conditional on `(κ₀, θ₀)`, the pair `(κ_t, θ_t)` is bivariate Gaussian:
//! the curvature is an Ornstein-Uhlenbeck process and the angle is its time
//! integral. Mean and covariance are in closed form, which gives an exact
//! sampler at any step size, the stationary angle-increment variance, and
//! the stationary velocity autocorrelation that feeds the Green-Kubo
//! integral.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PtwError, Result};

/// Joint law of `(κ_t, θ_t)` given `(κ₀, θ₀)`. Component order is κ first,
/// θ second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTransition {
    pub t: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

/// `t - 1 + e^{-t}`, stable for small `t` (the naive form cancels to zero).
pub(crate) fn t_plus_expm1_neg(t: f64) -> f64 {
    if t < 0.01 {
        // t^2/2 - t^3/6 + t^4/24 - t^5/120 + t^6/720 - t^7/5040
        let t2 = t * t;
        t2 * (0.5
            + t * (-1.0 / 6.0
                + t * (1.0 / 24.0 + t * (-1.0 / 120.0 + t * (1.0 / 720.0 - t / 5040.0)))))
    } else {
        t + (-t).exp_m1()
    }
}

/// Covariance scale matrix entries of the transition over time `t`
/// (to be multiplied by `α²`):
/// `[[1-e^{-2t}, (1-e^{-t})²], [(1-e^{-t})², 2t-3+4e^{-t}-e^{-2t}]]`.
fn cov_scale(t: f64) -> [[f64; 2]; 2] {
    let em1 = (-t).exp_m1(); // e^{-t} - 1
    let c11 = -(-2.0 * t).exp_m1();
    let c12 = em1 * em1;
    // 2t - 3 + 4 e^{-t} - e^{-2t} == 2 (t - 1 + e^{-t}) - (1 - e^{-t})^2
    let c22 = 2.0 * t_plus_expm1_neg(t) - em1 * em1;
    [[c11, c12], [c12, c22]]
}

/// Exact transition law of `(κ, θ)` over elapsed time `t ≥ 0`.
///
/// Mean `(e^{-t}κ₀, θ₀ + (1-e^{-t})κ₀)`, covariance `α²` times the scale
/// matrix of [`cov_scale`]. Entries use `expm1`-based forms so the matrix
/// stays positive semidefinite down to `t ≈ 1e-8`, where the angle variance
/// is of order `t³`.
///
/// ```
/// // after t = ln 2 the curvature halves in mean and its variance is 3α²/4
/// let law = ptw::gaussian::transition_law(2f64.ln(), (1.0, 0.0), 1.0).unwrap();
/// assert!((law.mean[0] - 0.5).abs() < 1e-14);
/// assert!((law.cov[0][0] - 0.75).abs() < 1e-14);
/// ```
pub fn transition_law(t: f64, y0: (f64, f64), alpha: f64) -> Result<GaussianTransition> {
    if t < 0.0 || !t.is_finite() {
        return Err(PtwError::NegativeTime(t));
    }
    let (kappa0, theta0) = y0;
    let em1 = (-t).exp_m1();
    let mean = [(1.0 + em1) * kappa0, theta0 - em1 * kappa0];
    let a2 = alpha * alpha;
    let s = cov_scale(t);
    let cov = [[a2 * s[0][0], a2 * s[0][1]], [a2 * s[1][0], a2 * s[1][1]]];
    Ok(GaussianTransition { t, mean, cov })
}

/// Lower Cholesky factor of a 2x2 covariance. Round-off can push the Schur
/// complement slightly negative at tiny `t`; it is clipped at zero, which is
/// the eigenvalue-clipping fallback for this 2x2 case.
pub(crate) fn cholesky2(cov: &[[f64; 2]; 2]) -> [f64; 3] {
    let l11 = cov[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cov[0][1] / l11 } else { 0.0 };
    let schur = cov[1][1] - l21 * l21;
    let l22 = schur.max(0.0).sqrt();
    [l11, l21, l22]
}

/// Draw `(κ_t, θ_t)` (θ unwrapped) from a transition law. At `t = 0` the
/// covariance vanishes and the mean is returned exactly.
pub fn sample_transition<R: Rng + ?Sized>(law: &GaussianTransition, rng: &mut R) -> (f64, f64) {
    let l = cholesky2(&law.cov);
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    (law.mean[0] + l[0] * z1, law.mean[1] + l[1] * z1 + l[2] * z2)
}

/// Stationary variance of the angle increment,
/// `Var_μ(θ_t - θ₀) = 2α²(t - 1 + e^{-t})`.
///
/// Under the invariant law `κ₀ ~ N(0, α²)`, the increment
/// `θ_t - θ₀ = (1-e^{-t})κ₀ + noise` is centered Gaussian; adding the two
/// independent contributions collapses to this two-term form.
pub fn angle_increment_variance(t: f64, alpha: f64) -> f64 {
    2.0 * alpha * alpha * t_plus_expm1_neg(t)
}

/// Stationary velocity autocorrelation
/// `E_μ[cos(θ_s - θ₀)] = exp(-α²(s - 1 + e^{-s}))`.
///
/// For a centered Gaussian `Z`, `E[cos Z] = e^{-Var(Z)/2}`; the uniform
/// initial angle kills all cross terms, so the autocorrelation is exactly
/// `exp(-Var_μ(θ_s - θ₀)/2)`.
pub fn velocity_autocorrelation(s: f64, alpha: f64) -> f64 {
    (-alpha * alpha * t_plus_expm1_neg(s)).exp()
}

/// Stationary curvature autocorrelation `E_μ[κ₀ κ_s] = α² e^{-s}`.
pub fn ou_autocorrelation(s: f64, alpha: f64) -> f64 {
    alpha * alpha * (-s).exp()
}
