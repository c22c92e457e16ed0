//! Model configuration, state types, and the invariant law of the kinetic
//! variables.
//!
//! The planar walker carries a velocity angle `θ` and a curvature `κ`. The
//! curvature relaxes toward zero and is driven by white noise of amplitude
//! `√2·α`; the angle integrates the curvature; the position integrates the
//! unit heading `τ(θ)`, optionally slowed down by a curvature-dependent
//! speed profile. The pair `(θ mod 2π, κ)` has a unique stationary law:
//! uniform angle times centered Gaussian curvature of variance `α²`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PtwError, Result};

/// Curvature-dependent speed profile `c(|κ|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpeedProfile {
    /// Constant unit speed.
    Unit,
    /// `c(|κ|) = a / (1 + b·|κ|)`.
    RationalDecay { a: f64, b: f64 },
    /// Tabulated profile, interpolated linearly in `|κ|` and extended by
    /// its end values. Knots must be sorted in `|κ|` with non-increasing
    /// positive speeds.
    UserTable { knots: Vec<(f64, f64)> },
}

/// Curvature drift specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DriftSpec {
    /// Linear restoring drift `-κ` (the base model).
    Ou,
    /// `-sign(κ)|κ|^p`, smoothed near zero as `-κ·(ε² + κ²)^{(p-1)/2}` so the
    /// drift stays Lipschitz at the origin.
    PowerLaw { p: f64 },
}

/// Smoothing scale for the power-law drift at `κ = 0`.
pub const DRIFT_SMOOTHING: f64 = 1e-6;

/// Physical configuration: noise amplitude, speed profile, curvature drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub speed: SpeedProfile,
    pub drift: DriftSpec,
}

impl ModelParams {
    /// Base model: OU drift, unit speed.
    pub fn ou(alpha: f64) -> Result<Self> {
        let p = Self { alpha, speed: SpeedProfile::Unit, drift: DriftSpec::Ou };
        p.validate()?;
        Ok(p)
    }

    pub fn with_speed(mut self, speed: SpeedProfile) -> Result<Self> {
        self.speed = speed;
        self.validate()?;
        Ok(self)
    }

    pub fn with_drift(mut self, drift: DriftSpec) -> Result<Self> {
        self.drift = drift;
        self.validate()?;
        Ok(self)
    }

    /// Check all parameter invariants. `alpha = 0` is rejected because the
    /// diffusion constant diverges and the invariant curvature law
    /// degenerates.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(PtwError::InvalidParameter(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        match &self.speed {
            SpeedProfile::Unit => {}
            SpeedProfile::RationalDecay { a, b } => {
                if !(*a > 0.0) || !(*b >= 0.0) {
                    return Err(PtwError::InvalidParameter(format!(
                        "rational decay needs a > 0, b >= 0, got a={a}, b={b}"
                    )));
                }
            }
            SpeedProfile::UserTable { knots } => {
                if knots.is_empty() {
                    return Err(PtwError::InvalidParameter("empty speed table".into()));
                }
                for w in knots.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(PtwError::InvalidParameter(
                            "speed table knots must be strictly increasing in |kappa|".into(),
                        ));
                    }
                    if w[1].1 > w[0].1 {
                        return Err(PtwError::InvalidParameter(
                            "speed table must be non-increasing".into(),
                        ));
                    }
                }
                if knots.iter().any(|&(k, c)| k < 0.0 || c <= 0.0) {
                    return Err(PtwError::InvalidParameter(
                        "speed table needs |kappa| >= 0 and speeds > 0".into(),
                    ));
                }
            }
        }
        if let DriftSpec::PowerLaw { p } = self.drift {
            if !(p > 0.0) {
                return Err(PtwError::InvalidParameter(format!(
                    "power-law exponent must be positive for a normalizable invariant law, got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Upper bound on the speed profile, used for arc-length bounds.
    pub fn max_speed(&self) -> f64 {
        match &self.speed {
            SpeedProfile::Unit => 1.0,
            SpeedProfile::RationalDecay { a, .. } => *a,
            SpeedProfile::UserTable { knots } => knots[0].1,
        }
    }

    /// Drift field acting on the curvature.
    pub fn drift_at(&self, kappa: f64) -> f64 {
        match self.drift {
            DriftSpec::Ou => -kappa,
            DriftSpec::PowerLaw { p } => {
                -kappa * (DRIFT_SMOOTHING * DRIFT_SMOOTHING + kappa * kappa).powf((p - 1.0) / 2.0)
            }
        }
    }
}

/// Kinetic state on the cylinder: angle reduced to `[0, 2π)`, finite
/// curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticState {
    pub theta: f64,
    pub kappa: f64,
}

impl KineticState {
    pub fn new(theta: f64, kappa: f64) -> Self {
        Self { theta: wrap_angle(theta), kappa }
    }
}

/// Full state: planar position, cumulative (unwrapped) angle, curvature.
///
/// The simulator propagates the angle on the real line because the exact
/// Gaussian increments live there; observables reduce it modulo 2π through
/// [`FullState::kinetic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub x: [f64; 2],
    pub theta_unwrapped: f64,
    pub kappa: f64,
}

impl FullState {
    /// Start at the origin with the given kinetic state.
    pub fn at_origin(y: KineticState) -> Self {
        Self { x: [0.0, 0.0], theta_unwrapped: y.theta, kappa: y.kappa }
    }

    /// Kinetic view with the angle wrapped to `[0, 2π)`.
    pub fn kinetic(&self) -> KineticState {
        KineticState::new(self.theta_unwrapped, self.kappa)
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return exactly TAU when theta is a tiny negative number
    if r == TAU {
        0.0
    } else {
        r
    }
}

/// Unit heading `τ(θ) = (cos θ, sin θ)`.
pub fn tau(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Speed `c(|κ|)` for the configured profile.
pub fn speed(params: &ModelParams, kappa: f64) -> f64 {
    let k = kappa.abs();
    match &params.speed {
        SpeedProfile::Unit => 1.0,
        SpeedProfile::RationalDecay { a, b } => a / (1.0 + b * k),
        SpeedProfile::UserTable { knots } => {
            if k <= knots[0].0 {
                return knots[0].1;
            }
            if k >= knots[knots.len() - 1].0 {
                return knots[knots.len() - 1].1;
            }
            let hi = knots.partition_point(|&(x, _)| x < k);
            let (x0, c0) = knots[hi - 1];
            let (x1, c1) = knots[hi];
            c0 + (c1 - c0) * (k - x0) / (x1 - x0)
        }
    }
}

/// Draw from the invariant law: uniform angle, Gaussian curvature of
/// variance `α²`, independent. Defined for the OU drift only; use
/// [`PowerLawInvariant`] for power-law drifts.
pub fn sample_invariant<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<KineticState> {
    match params.drift {
        DriftSpec::Ou => {
            let theta = rng.gen::<f64>() * TAU;
            let z: f64 = rng.sample(StandardNormal);
            Ok(KineticState::new(theta, params.alpha * z))
        }
        DriftSpec::PowerLaw { .. } => Err(PtwError::RequiresOuDrift("sample_invariant")),
    }
}

/// Invariant density on the cylinder,
/// `(2π)^{-1} (2πα²)^{-1/2} exp(-κ²/(2α²))`. OU drift only.
pub fn invariant_density(y: &KineticState, params: &ModelParams) -> Result<f64> {
    match params.drift {
        DriftSpec::Ou => {
            let a2 = params.alpha * params.alpha;
            Ok((TAU).recip() * (TAU * a2).sqrt().recip() * (-y.kappa * y.kappa / (2.0 * a2)).exp())
        }
        DriftSpec::PowerLaw { .. } => Err(PtwError::RequiresOuDrift("invariant_density")),
    }
}

/// Invariant curvature law for power-law drifts, `∝ exp(-V(κ)/α²)` with
/// `V' = -drift`, sampled by inverse transform on a tabulated CDF.
///
/// With the smoothed drift the potential has the closed form
/// `V(κ) = ((ε² + κ²)^{(p+1)/2} - ε^{p+1}) / (p+1)`, so for `p = 1` the law
/// is exactly Gaussian of variance `α²`.
pub struct PowerLawInvariant {
    alpha: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl PowerLawInvariant {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let p = match params.drift {
            DriftSpec::PowerLaw { p } => p,
            DriftSpec::Ou => {
                return Err(PtwError::InvalidParameter(
                    "PowerLawInvariant is for power-law drifts; use sample_invariant for OU".into(),
                ))
            }
        };
        params.validate()?;
        let a2 = params.alpha * params.alpha;
        // Range where the density is representable: V(κ)/α² <= 680.
        let kmax = ((p + 1.0) * 680.0 * a2 + DRIFT_SMOOTHING.powi(2)).powf(1.0 / (p + 1.0));
        let n = 16_384usize;
        let h = 2.0 * kmax / n as f64;
        let dens = |k: f64| (-potential(k, p) / a2).exp();
        let mut grid = Vec::with_capacity(n + 1);
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        grid.push(-kmax);
        cdf.push(0.0);
        let mut prev = dens(-kmax);
        for i in 1..=n {
            let k = -kmax + i as f64 * h;
            let d = dens(k);
            acc += 0.5 * h * (prev + d);
            prev = d;
            grid.push(k);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        Ok(Self { alpha: params.alpha, grid, cdf })
    }

    /// Draw `(θ, κ)` with uniform angle and tabulated curvature law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KineticState {
        let theta = rng.gen::<f64>() * TAU;
        let u = rng.gen::<f64>();
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let kappa = self.grid[i - 1] + frac * (self.grid[i] - self.grid[i - 1]);
        KineticState::new(theta, kappa)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

fn potential(kappa: f64, p: f64) -> f64 {
    let e2 = DRIFT_SMOOTHING * DRIFT_SMOOTHING;
    ((e2 + kappa * kappa).powf((p + 1.0) / 2.0) - e2.powf((p + 1.0) / 2.0)) / (p + 1.0)
}

/// Common observables on the kinetic state.
pub mod observables {
    use super::KineticState;

    pub fn cos_theta(y: &KineticState) -> f64 {
        y.theta.cos()
    }

    pub fn sin_theta(y: &KineticState) -> f64 {
        y.theta.sin()
    }

    pub fn kappa(y: &KineticState) -> f64 {
        y.kappa
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::stats::inference::{ks_critical, ks_statistic_sorted};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn tau_at_axes() {
        assert_eq!(tau(0.0), [1.0, 0.0]);
        let t = tau(PI / 2.0);
        assert!(t[0].abs() < 1e-15 && (t[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tau_periodic() {
        let a = tau(TAU + 0.3);
        let b = tau(0.3);
        assert!((a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12);
    }

    #[test]
    fn tau_unit_norm_random_angles() {
        let mut rng = stream_rng(1, "tau-norm", 0);
        for _ in 0..10_000 {
            let th = (rng.gen::<f64>() - 0.5) * 400.0;
            let t = tau(th);
            let norm = (t[0] * t[0] + t[1] * t[1]).sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn speed_profiles() {
        let unit = ModelParams::ou(1.0).unwrap();
        assert_eq!(speed(&unit, 3.7), 1.0);

        let fig1 = ModelParams::ou(1.0)
            .unwrap()
            .with_speed(SpeedProfile::RationalDecay { a: 1.0, b: 2.0 })
            .unwrap();
        assert_eq!(speed(&fig1, 0.0), 1.0);
        assert_abs_diff_eq!(speed(&fig1, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(speed(&fig1, -1.0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn speed_table_interpolates_and_extends() {
        let p = ModelParams::ou(1.0)
            .unwrap()
            .with_speed(SpeedProfile::UserTable { knots: vec![(0.0, 2.0), (1.0, 1.0), (2.0, 1.0)] })
            .unwrap();
        assert_eq!(speed(&p, 0.5), 1.5);
        assert_eq!(speed(&p, 5.0), 1.0); // constant extrapolation
        assert_eq!(speed(&p, -0.25), 1.75);
        assert_eq!(p.max_speed(), 2.0);

        // non-monotone tables are rejected
        let bad = ModelParams::ou(1.0)
            .unwrap()
            .with_speed(SpeedProfile::UserTable { knots: vec![(0.0, 1.0), (1.0, 2.0)] });
        assert!(bad.is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::ou(0.0).is_err());
        assert!(ModelParams::ou(-1.0).is_err());
        assert!(ModelParams::ou(1.0).unwrap().with_drift(DriftSpec::PowerLaw { p: 0.0 }).is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let p = ModelParams::ou(0.5)
            .unwrap()
            .with_speed(SpeedProfile::RationalDecay { a: 1.0, b: 2.0 })
            .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"alpha\":0.5"));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn invariant_sample_moments() {
        let alpha = 0.8;
        let params = ModelParams::ou(alpha).unwrap();
        let mut rng = stream_rng(7, "invariant", 0);
        let n = 1_000_000usize;
        let mut sk = 0.0;
        let mut sk2 = 0.0;
        let mut sth = 0.0;
        let mut cross = 0.0;
        for _ in 0..n {
            let y = sample_invariant(&params, &mut rng).unwrap();
            sk += y.kappa;
            sk2 += y.kappa * y.kappa;
            sth += y.theta;
            cross += y.theta * y.kappa;
        }
        let nf = n as f64;
        let mean_k = sk / nf;
        let var_k = sk2 / nf - mean_k * mean_k;
        assert!(mean_k.abs() < 4.0 * alpha / 1e3);
        assert!((var_k - alpha * alpha).abs() < 0.01 * alpha * alpha);
        // sample correlation between theta and kappa
        let mean_th = sth / nf;
        let cov = cross / nf - mean_th * mean_k;
        let corr = cov / (alpha * (TAU * TAU / 12.0).sqrt());
        assert!(corr.abs() <= 4.0 / nf.sqrt());
    }

    #[test]
    fn invariant_theta_uniform_ks() {
        let params = ModelParams::ou(1.0).unwrap();
        let mut rng = stream_rng(7, "invariant-ks", 0);
        let n = 100_000usize;
        let mut th: Vec<f64> = (0..n)
            .map(|_| sample_invariant(&params, &mut rng).unwrap().theta)
            .collect();
        th.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_statistic_sorted(&th, |x| x / TAU);
        assert!(d < ks_critical(n, 0.01), "KS {d} above 1% critical");
    }

    #[test]
    fn invariant_rejects_power_law() {
        let params =
            ModelParams::ou(1.0).unwrap().with_drift(DriftSpec::PowerLaw { p: 0.5 }).unwrap();
        let mut rng = stream_rng(7, "invariant", 1);
        assert!(sample_invariant(&params, &mut rng).is_err());
        assert!(invariant_density(&KineticState::new(0.0, 0.0), &params).is_err());
    }

    #[test]
    fn invariant_density_values() {
        let params = ModelParams::ou(1.0).unwrap();
        let d0 = invariant_density(&KineticState::new(0.0, 0.0), &params).unwrap();
        assert_abs_diff_eq!(d0, TAU.recip() * TAU.sqrt().recip(), epsilon = 1e-15);
        // independent of theta, strictly positive
        for i in 0..8 {
            let y = KineticState::new(i as f64, 1.3);
            let d = invariant_density(&y, &params).unwrap();
            assert!(d > 0.0);
            assert_abs_diff_eq!(
                d,
                invariant_density(&KineticState::new(0.0, 1.3), &params).unwrap(),
                epsilon = 1e-18
            );
        }
    }

    #[test]
    fn invariant_density_normalized() {
        // midpoint rule over a 256-point kappa grid on [-8, 8]; theta is flat
        let params = ModelParams::ou(1.0).unwrap();
        let n = 256;
        let h = 16.0 / n as f64;
        let mut total = 0.0;
        for j in 0..n {
            let k = -8.0 + (j as f64 + 0.5) * h;
            total += invariant_density(&KineticState::new(0.0, k), &params).unwrap() * h * TAU;
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn power_law_p1_matches_gaussian() {
        // p = 1 makes the smoothed drift exactly -kappa, so the invariant
        // curvature law is Gaussian(0, alpha^2)
        let alpha = 0.7;
        let params =
            ModelParams::ou(alpha).unwrap().with_drift(DriftSpec::PowerLaw { p: 1.0 }).unwrap();
        let sampler = PowerLawInvariant::new(&params).unwrap();
        let mut rng = stream_rng(11, "power-law", 0);
        let n = 100_000usize;
        let mut ks: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).kappa).collect();
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_statistic_sorted(&ks, |x| crate::stats::inference::normal_cdf(x, 0.0, alpha));
        assert!(d < ks_critical(n, 0.01), "KS {d} above critical");
    }

    #[test]
    fn power_law_moments_match_quadrature() {
        let alpha = 1.0;
        let p = 0.5;
        let params =
            ModelParams::ou(alpha).unwrap().with_drift(DriftSpec::PowerLaw { p }).unwrap();
        let sampler = PowerLawInvariant::new(&params).unwrap();

        // quadrature oracle for E[kappa^2] under exp(-V/alpha^2)
        let dens = |k: f64| (-potential(k, p) / (alpha * alpha)).exp();
        let (mut z, mut m2) = (0.0, 0.0);
        let n = 400_000;
        let h = 80.0 / n as f64;
        for i in 0..n {
            let k = -40.0 + (i as f64 + 0.5) * h;
            let d = dens(k);
            z += d * h;
            m2 += k * k * d * h;
        }
        let target = m2 / z;

        let mut rng = stream_rng(11, "power-law", 1);
        let nn = 400_000usize;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..nn {
            let k = sampler.sample(&mut rng).kappa;
            s1 += k;
            s2 += k * k;
        }
        let mean = s1 / nn as f64;
        let var = s2 / nn as f64;
        assert!(mean.abs() < 4.0 * (target / nn as f64).sqrt() + 1e-3);
        assert!((var - target).abs() < 0.02 * target);
    }

    #[test]
    fn wrap_angle_range() {
        let mut rng = stream_rng(3, "wrap", 0);
        for _ in 0..10_000 {
            let th = (rng.gen::<f64>() - 0.5) * 1e4;
            let w = wrap_angle(th);
            assert!((0.0..TAU).contains(&w), "wrap({th}) = {w}");
        }
        assert_eq!(wrap_angle(-1e-18), 0.0);
    }
}
