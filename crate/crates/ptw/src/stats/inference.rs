//! Statistical tests used by the verification harness: Kolmogorov-Smirnov
//! against a reference CDF, moment-based normality checks, and a
//! permutation independence test (Pearson and distance correlation).

use rand::seq::SliceRandom;
use statrs::function::erf::erf;

use crate::error::{PtwError, Result};
use crate::rng::stream_rng;

/// Standard normal CDF with location/scale.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

/// One-sample KS statistic for pre-sorted data against a reference CDF.
pub fn ks_statistic_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Critical KS distance at significance `alpha_level` for sample size `n`
/// (asymptotic: `λ*/√n` with `Q(λ*) = alpha_level`).
pub fn ks_critical(n: usize, alpha_level: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 4.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > alpha_level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (n as f64).sqrt()
}

/// Moment-and-KS report for samples expected to be `N(0, expected_variance)`.
#[derive(Debug, Clone)]
pub struct NormalityReport {
    pub n: usize,
    pub variance_ratio: f64,
    pub variance_ratio_se: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub ks_critical_1pct: f64,
    pub variance_ok: bool,
    pub skewness_ok: bool,
    pub kurtosis_ok: bool,
    pub ks_ok: bool,
}

impl NormalityReport {
    pub fn passed(&self) -> bool {
        self.variance_ok && self.skewness_ok && self.kurtosis_ok && self.ks_ok
    }
}

/// Test zero-mean samples against a Gaussian with the given variance:
/// variance ratio within `max(3 SE, 5%)`, skewness within `4√(6/n)`, excess
/// kurtosis within `5√(24/n)`, KS distance below the 1% critical value.
pub fn clt_normality(samples: &[f64], expected_variance: f64) -> Result<NormalityReport> {
    let n = samples.len();
    if n < 1000 {
        return Err(PtwError::BadSample(format!("need >= 1000 samples, got {n}")));
    }
    if !(expected_variance > 0.0) {
        return Err(PtwError::BadSample("expected variance must be positive".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let variance_ratio = m2 / expected_variance;
    // SE of the sample variance from the fourth moment
    let var_se = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
    let variance_ratio_se = var_se / expected_variance;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;

    let sd = expected_variance.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks_distance = ks_statistic_sorted(&sorted, |x| normal_cdf(x, 0.0, sd));
    let ks_crit = ks_critical(n, 0.01);

    Ok(NormalityReport {
        n,
        variance_ratio,
        variance_ratio_se,
        skewness,
        excess_kurtosis,
        ks_distance,
        ks_critical_1pct: ks_crit,
        variance_ok: (variance_ratio - 1.0).abs() <= (3.0 * variance_ratio_se).max(0.05),
        skewness_ok: skewness.abs() <= 4.0 * (6.0 / nf).sqrt(),
        kurtosis_ok: excess_kurtosis.abs() <= 5.0 * (24.0 / nf).sqrt(),
        ks_ok: ks_distance < ks_crit,
    })
}

/// Result of the permutation independence test.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub n: usize,
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub distance_correlation: f64,
    pub distance_correlation_p: f64,
    /// Pair count used for the distance-correlation statistic (subsampled
    /// when the input is large; the Pearson test always uses all pairs).
    pub dcor_n: usize,
    pub threshold: f64,
}

impl IndependenceReport {
    pub fn passed(&self) -> bool {
        self.pearson_p > self.threshold && self.distance_correlation_p > self.threshold
    }
}

/// Permutation independence test on paired samples.
///
/// Pearson correlation on all pairs plus a distance-correlation statistic on
/// at most 1024 pairs (the statistic is quadratic in the pair count), each
/// with an add-one permutation p-value from `n_permutations` resamples drawn
/// from a dedicated stream of `seed`.
pub fn independence_test(
    pairs: &[(f64, f64)],
    n_permutations: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    let n = pairs.len();
    if n < 16 {
        return Err(PtwError::BadSample(format!("need >= 16 pairs, got {n}")));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    let r_obs = pearson(&xs, &ys).abs();
    let mut rng = stream_rng(seed, "independence-perm", 0);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut exceed_r = 0usize;
    for _ in 0..n_permutations {
        perm.shuffle(&mut rng);
        let yp: Vec<f64> = perm.iter().map(|&i| ys[i]).collect();
        if pearson(&xs, &yp).abs() >= r_obs {
            exceed_r += 1;
        }
    }
    let pearson_p = (1 + exceed_r) as f64 / (1 + n_permutations) as f64;

    // distance correlation on a deterministic subsample
    let m = n.min(1024);
    let idx: Vec<usize> = if m == n {
        (0..n).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        let mut srng = stream_rng(seed, "independence-sub", 0);
        all.shuffle(&mut srng);
        all.truncate(m);
        all
    };
    let xs_s: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let ys_s: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let a = centered_distances(&xs_s);
    let b = centered_distances(&ys_s);
    let dvar_x = matrix_dot(&a, &a, m);
    let dvar_y = matrix_dot(&b, &b, m);
    let denom = (dvar_x * dvar_y).sqrt();
    let dcor_of = |b_perm: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += a[i * m + j] * b_perm(i, j);
            }
        }
        if denom > 0.0 {
            (s / (m * m) as f64 / denom).max(0.0).sqrt()
        } else {
            0.0
        }
    };
    let dcor_obs = dcor_of(&|i, j| b[i * m + j]);
    let mut perm_s: Vec<usize> = (0..m).collect();
    let mut prng = stream_rng(seed, "independence-dcor-perm", 0);
    let mut exceed_d = 0usize;
    for _ in 0..n_permutations {
        perm_s.shuffle(&mut prng);
        let d = dcor_of(&|i, j| b[perm_s[i] * m + perm_s[j]]);
        if d >= dcor_obs {
            exceed_d += 1;
        }
    }
    let dcor_p = (1 + exceed_d) as f64 / (1 + n_permutations) as f64;

    Ok(IndependenceReport {
        n,
        pearson_r: pearson(&xs, &ys),
        pearson_p,
        distance_correlation: dcor_obs,
        distance_correlation_p: dcor_p,
        dcor_n: m,
        threshold: 0.01,
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx > 0.0 && syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        0.0
    }
}

/// Double-centered distance matrix, row-major.
fn centered_distances(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            d[i * m + j] = (v[i] - v[j]).abs();
        }
    }
    let mut row_mean = vec![0.0; m];
    let mut total = 0.0;
    for i in 0..m {
        let s: f64 = d[i * m..(i + 1) * m].iter().sum();
        row_mean[i] = s / m as f64;
        total += s;
    }
    let grand = total / (m * m) as f64;
    for i in 0..m {
        for j in 0..m {
            d[i * m + j] += grand - row_mean[i] - row_mean[j];
        }
    }
    d
}

fn matrix_dot(a: &[f64], b: &[f64], m: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..m * m {
        s += a[i] * b[i];
    }
    s / (m * m) as f64
}

/// Marginal equilibrium checks on `(θ, κ)` samples: uniform-angle KS and
/// Gaussian-curvature KS at the 1% level, curvature mean within `4 SE` and
/// variance within `max(4 SE, 1%)`.
#[derive(Debug, Clone)]
pub struct MarginalReport {
    pub n: usize,
    pub theta_ks: f64,
    pub kappa_ks: f64,
    pub ks_critical_1pct: f64,
    pub kappa_mean: f64,
    pub kappa_var: f64,
    pub theta_ok: bool,
    pub kappa_ks_ok: bool,
    pub kappa_mean_ok: bool,
    pub kappa_var_ok: bool,
}

impl MarginalReport {
    pub fn passed(&self) -> bool {
        self.theta_ok && self.kappa_ks_ok && self.kappa_mean_ok && self.kappa_var_ok
    }
}

/// Run the equilibrium marginal tests on `(θ ∈ [0,2π), κ)` samples.
/// Sorts in place.
pub fn equilibrium_marginal_report(samples: &mut [(f64, f64)], alpha: f64) -> MarginalReport {
    let n = samples.len();
    let nf = n as f64;
    let mut thetas: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut kappas: Vec<f64> = samples.iter().map(|s| s.1).collect();
    thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kappas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let theta_ks = ks_statistic_sorted(&thetas, |x| x / std::f64::consts::TAU);
    let kappa_ks = ks_statistic_sorted(&kappas, |x| normal_cdf(x, 0.0, alpha));
    let crit = ks_critical(n, 0.01);
    let mean = kappas.iter().sum::<f64>() / nf;
    let var = kappas.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / nf;
    let a2 = alpha * alpha;
    MarginalReport {
        n,
        theta_ks,
        kappa_ks,
        ks_critical_1pct: crit,
        kappa_mean: mean,
        kappa_var: var,
        theta_ok: theta_ks < crit,
        kappa_ks_ok: kappa_ks < crit,
        kappa_mean_ok: mean.abs() <= 4.0 * alpha / nf.sqrt(),
        kappa_var_ok: (var - a2).abs() <= (4.0 * (2.0 / nf).sqrt() * a2).max(0.01 * a2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn kolmogorov_critical_value() {
        // Q(1.6276) ~ 0.01
        let c = ks_critical(10_000, 0.01);
        assert!((c * 100.0 - 1.6276).abs() < 1e-3, "critical {c}");
    }

    #[test]
    fn ks_detects_uniform_and_rejects_shifted() {
        let mut rng = stream_rng(1, "ks-test", 0);
        let n = 20_000;
        let mut unif: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        unif.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ks_statistic_sorted(&unif, |x| x) < ks_critical(n, 0.01));
        let mut shifted: Vec<f64> = unif.iter().map(|x| x.powf(1.1)).collect();
        shifted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ks_statistic_sorted(&shifted, |x| x) > ks_critical(n, 0.01));
    }

    #[test]
    fn normality_passes_on_gaussian_input() {
        let mut rng = stream_rng(2, "norm-cal", 0);
        let sd = 1.7;
        let samples: Vec<f64> =
            (0..20_000).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let rep = clt_normality(&samples, sd * sd).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn normality_rejects_wrong_variance_and_shape() {
        let mut rng = stream_rng(2, "norm-rej", 0);
        let samples: Vec<f64> =
            (0..20_000).map(|_| 1.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let rep = clt_normality(&samples, 1.0).unwrap();
        assert!(!rep.variance_ok && !rep.ks_ok);
        // exponential-ish input fails shape tests
        let skewed: Vec<f64> = (0..20_000).map(|_| -rng.gen::<f64>().ln() - 1.0).collect();
        let rep = clt_normality(&skewed, 1.0).unwrap();
        assert!(!rep.skewness_ok || !rep.kurtosis_ok);
    }

    #[test]
    fn normality_needs_enough_samples() {
        assert!(clt_normality(&[0.0; 10], 1.0).is_err());
    }

    #[test]
    fn independence_detects_coupling() {
        let mut rng = stream_rng(3, "indep-coupled", 0);
        let pairs: Vec<(f64, f64)> = (0..2000)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                (x, 0.3 * x + e)
            })
            .collect();
        let rep = independence_test(&pairs, 499, 99).unwrap();
        assert!(!rep.passed(), "{rep:?}");
    }

    #[test]
    fn independence_detects_nonlinear_coupling() {
        // zero linear correlation, strong dependence: only dcor sees it
        let mut rng = stream_rng(3, "indep-nonlinear", 0);
        let pairs: Vec<(f64, f64)> = (0..1000)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                (x, x * x + 0.3 * e)
            })
            .collect();
        let rep = independence_test(&pairs, 499, 99).unwrap();
        assert!(rep.distance_correlation_p <= 0.01, "{rep:?}");
    }

    #[test]
    fn independence_calibrated_on_independent_pairs() {
        // with 199 permutations the add-one p-value is at least 1/200, so
        // 100 calibration replicates stay within [0.005, 1]
        let mut min_p: f64 = 1.0;
        let mut ps = Vec::new();
        for rep in 0..100u64 {
            let mut rng = stream_rng(4, "indep-cal", rep);
            let pairs: Vec<(f64, f64)> = (0..128)
                .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let r = independence_test(&pairs, 199, rep).unwrap();
            let p = r.pearson_p.min(r.distance_correlation_p);
            min_p = min_p.min(p);
            ps.push(p);
        }
        assert!((0.005..=1.0).contains(&min_p), "min p {min_p}");
        // p-values should spread over the unit interval, not cluster at 0
        let below_1pct = ps.iter().filter(|&&p| p <= 0.01).count();
        assert!(below_1pct <= 5, "{below_1pct} of 100 calibration p-values at or below 1%");
    }

    #[test]
    fn marginal_report_calibration() {
        let mut rng = stream_rng(5, "marg-cal", 0);
        let alpha = 0.9;
        let mut ok: Vec<(f64, f64)> = (0..50_000)
            .map(|_| {
                (rng.gen::<f64>() * std::f64::consts::TAU, alpha * rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        assert!(equilibrium_marginal_report(&mut ok, alpha).passed());
        let mut bad: Vec<(f64, f64)> = ok.iter().map(|&(t, k)| (t, k + 0.1)).collect();
        assert!(!equilibrium_marginal_report(&mut bad, alpha).passed());
    }
}
