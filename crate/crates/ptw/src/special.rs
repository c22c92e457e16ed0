//! Special functions used by the closed-form diffusion constant.

use crate::error::{PtwError, Result};

/// Maximum iterations for the incomplete-gamma series / continued fraction.
const MAX_ITER: usize = 500;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma function `P(a, x) = γ(a, x) / Γ(a)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction for the
/// complement otherwise. Relative accuracy is near machine precision away
/// from the underflow regime.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || x < 0.0 || !a.is_finite() || !x.is_finite() {
        return Err(PtwError::InvalidParameter(format!("reg_lower_gamma(a={a}, x={x})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    let prefactor = log_prefactor.exp();
    if x < a + 1.0 {
        series_p(a, x, prefactor)
    } else {
        Ok(1.0 - cf_q(a, x, prefactor)?)
    }
}

/// `P(a, x) = prefactor · Σ_{n≥0} x^n / (a (a+1) ... (a+n))`.
fn series_p(a: f64, x: f64, prefactor: f64) -> Result<f64> {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            return Ok(prefactor * sum);
        }
    }
    Err(PtwError::NoConvergence(format!("incomplete gamma series (a={a}, x={x})")))
}

/// Modified Lentz continued fraction for `Q(a, x)`.
fn cf_q(a: f64, x: f64, prefactor: f64) -> Result<f64> {
    let tiny = 1e-300;
    let b0 = x + 1.0 - a;
    let mut f = if b0.abs() < tiny { tiny } else { b0 };
    let mut c = f;
    let mut d = 0.0f64;
    for n in 1..=MAX_ITER {
        let nf = n as f64;
        let an = nf * (a - nf);
        let bn = x + 2.0 * nf + 1.0 - a;
        d = bn + an * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        c = bn + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            return Ok(prefactor / f);
        }
    }
    Err(PtwError::NoConvergence(format!("incomplete gamma continued fraction (a={a}, x={x})")))
}
