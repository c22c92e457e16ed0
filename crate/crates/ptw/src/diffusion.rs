//! The limiting diffusion constant, three ways.
//!
//! The per-component variance rate of the position in the diffusive limit is
//!
//! ```text
//! D = ∫₀^∞ exp(-α²(s - 1 + e^{-s})) ds
//! ```
//!
//! i.e. the time integral of the stationary velocity autocorrelation. This
//! module evaluates it by adaptive quadrature with a rigorous tail bound, by
//! an incomplete-gamma closed form, and by Green-Kubo integration of a
//! sampled autocorrelation curve.

use crate::error::{PtwError, Result};
use crate::gaussian::velocity_autocorrelation;
use crate::special::{ln_gamma, reg_lower_gamma};

/// Result of the adaptive quadrature route.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    /// Accumulated local error estimates plus the analytic tail bound.
    pub abs_error_bound: f64,
    /// Truncation point beyond which the tail bound was used.
    pub truncation_t: f64,
    pub evaluations: u64,
}

/// Integrand `exp(-α²(s-1+e^{-s}))`; identical to the stationary velocity
/// autocorrelation.
pub fn diffusion_integrand(s: f64, alpha: f64) -> f64 {
    velocity_autocorrelation(s, alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(PtwError::InvalidParameter(format!(
            "alpha must be positive (integral diverges otherwise), got {alpha}"
        )));
    }
    Ok(())
}

/// Adaptive Simpson quadrature of the diffusion integral.
///
/// The integrand is at most `e^{α²} e^{-α² s}`, so the tail beyond `T` is at
/// most `e^{α²} e^{-α² T} / α²`; the truncation point is chosen so this
/// bound sits below `rel_tol` times a crude lower bound on the integral, and
/// it is added to the reported error bound rather than ignored.
pub fn compute_d_quadrature(alpha: f64, rel_tol: f64) -> Result<QuadratureResult> {
    check_alpha(alpha)?;
    let rel_tol = rel_tol.max(1e-12);
    let a2 = alpha * alpha;

    // Lower bound on D: the integrand decreases, so s·h(s) is a lower bound
    // for every s.
    let mut lower = 0.0f64;
    let mut s = 0.5;
    while s < 8.0 / a2.min(1.0) {
        lower = lower.max(s * diffusion_integrand(s, alpha));
        s *= 2.0;
    }
    let lower = lower.max(f64::MIN_POSITIVE);

    // tail(T) = e^{a2} e^{-a2 T} / a2 <= rel_tol * lower
    let t_star = (a2 + (1.0 / (rel_tol * lower * a2)).ln().max(0.0)) / a2;
    let tail_bound = (a2 - a2 * t_star).exp() / a2;

    let mut evals = 0u64;
    let f = |s: f64, evals: &mut u64| {
        *evals += 1;
        diffusion_integrand(s, alpha)
    };

    // composite adaptive Simpson over [0, T*]
    let mut value = 0.0;
    let mut err = 0.0;
    // split the long interval into unit-scale panels first so the recursion
    // starts from a sensible resolution
    let n_panels = (t_star.ceil() as usize).clamp(8, 4096);
    let hp = t_star / n_panels as f64;
    for i in 0..n_panels {
        let (a, b) = (i as f64 * hp, (i + 1) as f64 * hp);
        let fa = f(a, &mut evals);
        let fm = f(0.5 * (a + b), &mut evals);
        let fb = f(b, &mut evals);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let (v, e) = adaptive_simpson(
            &f,
            &mut evals,
            a,
            b,
            fa,
            fm,
            fb,
            whole,
            rel_tol * lower * hp / t_star,
            40,
        );
        value += v;
        err += e;
    }

    Ok(QuadratureResult {
        value,
        abs_error_bound: err + tail_bound,
        truncation_t: t_star,
        evaluations: evals,
    })
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64, &mut u64) -> f64>(
    f: &F,
    evals: &mut u64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm, evals);
    let frm = f(rm, evals);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        (left + right + delta / 15.0, delta.abs() / 15.0)
    } else {
        let (vl, el) =
            adaptive_simpson(f, evals, a, m, fa, flm, fm, left, tol / 2.0, depth - 1);
        let (vr, er) =
            adaptive_simpson(f, evals, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
        (vl + vr, el + er)
    }
}

/// Closed form of the diffusion integral.
///
/// Substituting `u = e^{-s}` and then `v = α² u` turns the integral into
/// `e^{α²} α^{-2α²} γ(α², α²)` with `γ` the lower incomplete gamma function.
/// Evaluated in log space as `exp(a - a ln a + lnΓ(a) + ln P(a,a))` with
/// `a = α²`, so large `α` cannot overflow. For `α = 1` this reduces to
/// `e (1 - e^{-1}) = e - 1`.
///
/// ```
/// let d = ptw::diffusion::compute_d_closed_form(1.0).unwrap();
/// assert!((d - (std::f64::consts::E - 1.0)).abs() < 1e-12);
/// ```
pub fn compute_d_closed_form(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let a = alpha * alpha;
    let p = reg_lower_gamma(a, a)?;
    Ok((a - a * a.ln() + ln_gamma(a) + p.ln()).exp())
}

/// Cutoff strategy for Green-Kubo integration of a noisy autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffRule {
    /// Integrate until `|C|` first falls below twice its standard error,
    /// then extrapolate the tail with an exponential fit. Falls back to the
    /// full range when all standard errors are zero (exact input).
    NoiseFloor,
    /// Integrate the whole sample, still adding the fitted tail.
    FullRange,
}

/// A Green-Kubo estimate with its propagated uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct GreenKuboEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Last index included in the trapezoid integral.
    pub cutoff_index: usize,
    /// Contribution of the fitted exponential tail.
    pub tail: f64,
    /// Fitted tail decay rate, when a fit was possible.
    pub tail_rate: Option<f64>,
}

/// Integrate a sampled autocorrelation curve `(s_i, C_i, se_i)` on a uniform
/// grid starting at `s = 0`.
///
/// Trapezoid up to the cutoff, exponential tail fitted on the last decade of
/// retained points (`s ∈ [s_cut/10, s_cut]`), statistical error propagated
/// through the trapezoid weights.
pub fn green_kubo(samples: &[(f64, f64, f64)], rule: CutoffRule) -> Result<GreenKuboEstimate> {
    if samples.len() < 4 {
        return Err(PtwError::BadSample("need at least 4 autocorrelation samples".into()));
    }
    if samples[0].0 != 0.0 {
        return Err(PtwError::BadSample("autocorrelation grid must start at s = 0".into()));
    }
    let ds = samples[1].0 - samples[0].0;
    if ds <= 0.0 {
        return Err(PtwError::BadSample("grid must be increasing".into()));
    }
    for (i, w) in samples.windows(2).enumerate() {
        if (w[1].0 - w[0].0 - ds).abs() > 1e-9 * ds.max(1.0) {
            return Err(PtwError::BadSample(format!("grid not uniform at index {i}")));
        }
    }

    let exact_input = samples.iter().all(|&(_, _, se)| se == 0.0);
    let cutoff = match rule {
        CutoffRule::FullRange => samples.len() - 1,
        CutoffRule::NoiseFloor if exact_input => samples.len() - 1,
        CutoffRule::NoiseFloor => {
            match samples.iter().position(|&(_, c, se)| c.abs() < 2.0 * se) {
                Some(i) if i > 0 => i,
                Some(_) => {
                    return Err(PtwError::BadSample(
                        "autocorrelation starts below its own noise".into(),
                    ))
                }
                None => {
                    return Err(PtwError::NoConvergence(
                        "correlation never decays below noise; more paths needed".into(),
                    ))
                }
            }
        }
    };

    let mut value = 0.0;
    let mut var = 0.0;
    for i in 0..=cutoff {
        let w = if i == 0 || i == cutoff { 0.5 * ds } else { ds };
        value += w * samples[i].1;
        var += (w * samples[i].2).powi(2);
    }

    // exponential tail from the last decade of positive retained values
    let s_cut = samples[cutoff].0;
    let fit_lo = (s_cut / 10.0).max(ds);
    let pts: Vec<(f64, f64)> = samples[..=cutoff]
        .iter()
        .filter(|&&(s, c, _)| s >= fit_lo && c > 0.0)
        .map(|&(s, c, _)| (s, c.ln()))
        .collect();
    let (tail, tail_rate) = if pts.len() >= 3 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom > 0.0 {
            let slope = (n * sxy - sx * sy) / denom;
            let rate = -slope;
            if rate > 0.0 {
                let c_cut = (sy / n + slope * (s_cut - sx / n)).exp();
                ((c_cut / rate), Some(rate))
            } else {
                (0.0, None)
            }
        } else {
            (0.0, None)
        }
    } else {
        (0.0, None)
    };

    // half the tail as a systematic allowance on top of the statistical error
    let std_error = (var + 0.25 * tail * tail).sqrt();
    Ok(GreenKuboEstimate { value: value + tail, std_error, cutoff_index: cutoff, tail, tail_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrand_values() {
        assert_eq!(diffusion_integrand(0.0, 1.0), 1.0);
        assert_abs_diff_eq!(
            diffusion_integrand(1.0, 1.0),
            (-(-1.0f64).exp()).exp(),
            epsilon = 1e-15
        );
        // monotone decreasing in s
        for alpha in [0.3, 1.0, 2.5] {
            let mut prev = 1.0;
            for i in 1..200 {
                let v = diffusion_integrand(i as f64 * 0.1, alpha);
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn closed_form_at_one_is_e_minus_one() {
        let d = compute_d_closed_form(1.0).unwrap();
        assert_abs_diff_eq!(d, std::f64::consts::E - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_at_one_is_e_minus_one() {
        let q = compute_d_quadrature(1.0, 1e-12).unwrap();
        let target = std::f64::consts::E - 1.0;
        assert!((q.value - target).abs() / target < 1e-10, "got {} (err {})", q.value, q.abs_error_bound);
        assert!(q.abs_error_bound >= 0.0 && q.value > 0.0);
    }

    #[test]
    fn quadrature_matches_closed_form_across_alpha() {
        for alpha in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let q = compute_d_quadrature(alpha, 1e-12).unwrap().value;
            let c = compute_d_closed_form(alpha).unwrap();
            assert!((q - c).abs() / c < 1e-10, "alpha={alpha}: {q} vs {c}");
        }
    }

    #[test]
    fn small_alpha_diverges_like_inverse_alpha_squared() {
        let alpha = 1e-3;
        let c = compute_d_closed_form(alpha).unwrap();
        let q = compute_d_quadrature(alpha, 1e-10).unwrap().value;
        assert!((c - 1e6).abs() / 1e6 < 0.01, "closed form {c}");
        assert!((q - c).abs() / c < 1e-8, "quadrature {q} vs closed {c}");
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        assert!(compute_d_quadrature(0.0, 1e-10).is_err());
        assert!(compute_d_closed_form(-1.0).is_err());
    }

    #[test]
    fn d_monotone_decreasing_in_alpha() {
        let mut prev = f64::INFINITY;
        let mut alpha = 0.1;
        while alpha <= 5.0 {
            let d = compute_d_closed_form(alpha).unwrap();
            assert!(d < prev, "D not decreasing at alpha={alpha}");
            prev = d;
            alpha *= 1.25;
        }
    }

    #[test]
    fn error_bound_is_honest() {
        for alpha in [0.5, 1.0, 3.0] {
            let coarse = compute_d_quadrature(alpha, 1e-6).unwrap();
            let fine = compute_d_quadrature(alpha, 1e-7).unwrap();
            assert!(
                (coarse.value - fine.value).abs() <= coarse.abs_error_bound,
                "alpha={alpha}: shift {} vs bound {}",
                (coarse.value - fine.value).abs(),
                coarse.abs_error_bound
            );
        }
    }

    #[test]
    fn green_kubo_on_exact_integrand() {
        let ds = 0.01;
        let n = (40.0 / ds) as usize + 1;
        let samples: Vec<(f64, f64, f64)> =
            (0..n).map(|i| (i as f64 * ds, diffusion_integrand(i as f64 * ds, 1.0), 0.0)).collect();
        let gk = green_kubo(&samples, CutoffRule::NoiseFloor).unwrap();
        let target = compute_d_quadrature(1.0, 1e-12).unwrap().value;
        assert!((gk.value - target).abs() < 1e-4, "gk {} vs {}", gk.value, target);
    }

    #[test]
    fn green_kubo_on_ou_autocorrelation() {
        let alpha: f64 = 1.3;
        let ds = 0.005;
        let n = (50.0 / ds) as usize + 1;
        let samples: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| (i as f64 * ds, crate::gaussian::ou_autocorrelation(i as f64 * ds, alpha), 0.0))
            .collect();
        let gk = green_kubo(&samples, CutoffRule::FullRange).unwrap();
        assert!((gk.value - alpha * alpha).abs() < 1e-4 * alpha * alpha);
    }

    #[test]
    fn green_kubo_zero_input() {
        let samples: Vec<(f64, f64, f64)> = (0..100).map(|i| (i as f64 * 0.1, 0.0, 0.0)).collect();
        let gk = green_kubo(&samples, CutoffRule::NoiseFloor).unwrap();
        assert_eq!(gk.value, 0.0);
    }

    #[test]
    fn green_kubo_noise_floor_cutoff() {
        // decaying curve with constant noise level: cutoff where C < 2 se
        let ds = 0.05;
        let n = 400;
        let se = 0.01;
        let samples: Vec<(f64, f64, f64)> =
            (0..n).map(|i| (i as f64 * ds, (-(i as f64) * ds).exp(), se)).collect();
        let gk = green_kubo(&samples, CutoffRule::NoiseFloor).unwrap();
        assert!(gk.cutoff_index < n - 1);
        assert!((gk.value - 1.0).abs() < 0.02, "gk {}", gk.value);
        assert!(gk.tail_rate.unwrap() > 0.5 && gk.tail_rate.unwrap() < 1.5);
    }

    #[test]
    fn green_kubo_never_decaying_errors() {
        let samples: Vec<(f64, f64, f64)> = (0..100).map(|i| (i as f64 * 0.1, 1.0, 0.01)).collect();
        assert!(green_kubo(&samples, CutoffRule::NoiseFloor).is_err());
    }

    #[test]
    fn green_kubo_trapezoid_order() {
        // halving ds must shrink the error by at least ~4x once above the
        // floating noise floor
        let target = compute_d_quadrature(1.0, 1e-12).unwrap().value;
        let err_at = |ds: f64| {
            let n = (60.0 / ds) as usize + 1;
            let samples: Vec<(f64, f64, f64)> = (0..n)
                .map(|i| (i as f64 * ds, diffusion_integrand(i as f64 * ds, 1.0), 0.0))
                .collect();
            (green_kubo(&samples, CutoffRule::FullRange).unwrap().value - target).abs()
        };
        let e1 = err_at(0.32);
        let e2 = err_at(0.16);
        let e3 = err_at(0.08);
        let s1 = (e1 / e2).log2();
        let s2 = (e2 / e3).log2();
        assert!(s1 >= 1.7 && s2 >= 1.7, "slopes {s1} {s2} (errors {e1} {e2} {e3})");
    }
}
