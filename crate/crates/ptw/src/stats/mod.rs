//! Ensemble Monte Carlo experiments and the statistics they report.
//!
//! Paths are partitioned into a fixed number of blocks; every path owns the
//! random stream indexed by its global path number, blocks are processed in
//! parallel, and all reductions run over the ordered block results with a
//! pairwise tree. Output is therefore byte-identical for a given seed at any
//! worker count. Standard errors come from delete-one-block jackknife.

pub mod inference;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PtwError, Result};
use crate::model::{sample_invariant, FullState, KineticState, ModelParams};
use crate::rng::stream_rng;
use crate::sim::{ExactStepper, Trajectory};

/// Initial condition of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitSpec {
    /// Draw `(θ, κ)` from the invariant law.
    Equilibrium,
    /// Dirac mass at a point.
    Dirac { theta: f64, kappa: f64 },
    /// Uniform draw from a compact box.
    UniformBox { theta: (f64, f64), kappa: (f64, f64) },
}

/// Configuration of a position-moment ensemble run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub params: ModelParams,
    pub n_paths: usize,
    pub t_final: f64,
    pub dt: f64,
    /// Record moment rows every this many steps.
    pub save_every: usize,
    /// Times at which `(θ_unwrapped, κ)` snapshots of every path are kept.
    pub snapshot_times: Vec<f64>,
    pub init: InitSpec,
    pub seed: u64,
    /// Jackknife block count (clamped to `n_paths`).
    pub n_blocks: usize,
}

impl EnsembleConfig {
    pub fn new(params: ModelParams, n_paths: usize, t_final: f64, dt: f64, seed: u64) -> Self {
        Self {
            params,
            n_paths,
            t_final,
            dt,
            save_every: ((0.5 / dt).round() as usize).max(1),
            snapshot_times: Vec::new(),
            init: InitSpec::Equilibrium,
            seed,
            n_blocks: 100,
        }
    }
}

const N_MOMENTS: usize = 9;

/// Raw position moments at one saved time:
/// `Σx₁, Σx₂, Σx₁², Σx₂², Σx₁x₂, Σx₁³, Σx₁⁴, Σx₂³, Σx₂⁴`.
type MomentRow = [f64; N_MOMENTS];

#[derive(Clone)]
struct BlockResult {
    n_paths: usize,
    moments: Vec<MomentRow>,
    snapshots: Vec<Vec<(f64, f64)>>,
}

fn merge_blocks(mut a: BlockResult, b: BlockResult) -> BlockResult {
    a.n_paths += b.n_paths;
    for (ra, rb) in a.moments.iter_mut().zip(&b.moments) {
        for k in 0..N_MOMENTS {
            ra[k] += rb[k];
        }
    }
    for (sa, sb) in a.snapshots.iter_mut().zip(b.snapshots) {
        sa.extend(sb);
    }
    a
}

/// Fold items with a pairwise tree so the floating-point summation order is
/// a fixed function of the item count.
fn pairwise_reduce<T, F: Fn(T, T) -> T + Copy>(mut items: Vec<T>, f: F) -> Option<T> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len() / 2 + 1);
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(f(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Per-time statistics with jackknife standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeRow {
    pub t: f64,
    pub mean: [f64; 2],
    pub mean_se: [f64; 2],
    pub var_over_t: [f64; 2],
    pub var_over_t_se: [f64; 2],
    pub cov_over_t: f64,
    pub cov_over_t_se: f64,
    pub skewness: [f64; 2],
    pub skewness_se: [f64; 2],
    pub excess_kurtosis: [f64; 2],
    pub excess_kurtosis_se: [f64; 2],
}

/// Snapshot of the kinetic variables across all paths at one time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// `(θ_unwrapped, κ)` per path, in path order.
    pub states: Vec<(f64, f64)>,
}

/// Ensemble output: per-time rows, optional snapshots, and the per-block
/// moments needed to jackknife derived fits.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub rows: Vec<TimeRow>,
    pub snapshots: Vec<Snapshot>,
    block_moments: Vec<Vec<MomentRow>>,
    block_sizes: Vec<usize>,
}

fn stats_from_moments(m: &MomentRow, n: f64, t: f64) -> [f64; 10] {
    let mean1 = m[0] / n;
    let mean2 = m[1] / n;
    let v1 = (m[2] / n - mean1 * mean1).max(0.0);
    let v2 = (m[3] / n - mean2 * mean2).max(0.0);
    let cov = m[4] / n - mean1 * mean2;
    let m3_1 = m[5] / n - 3.0 * mean1 * (m[2] / n) + 2.0 * mean1.powi(3);
    let m4_1 = m[6] / n - 4.0 * mean1 * (m[5] / n) + 6.0 * mean1 * mean1 * (m[2] / n)
        - 3.0 * mean1.powi(4);
    let m3_2 = m[7] / n - 3.0 * mean2 * (m[3] / n) + 2.0 * mean2.powi(3);
    let m4_2 = m[8] / n - 4.0 * mean2 * (m[7] / n) + 6.0 * mean2 * mean2 * (m[3] / n)
        - 3.0 * mean2.powi(4);
    let skew = |m3: f64, v: f64| if v > 0.0 { m3 / v.powf(1.5) } else { 0.0 };
    let kurt = |m4: f64, v: f64| if v > 0.0 { m4 / (v * v) - 3.0 } else { 0.0 };
    [
        mean1,
        mean2,
        v1 / t,
        v2 / t,
        cov / t,
        skew(m3_1, v1),
        kurt(m4_1, v1),
        skew(m3_2, v2),
        kurt(m4_2, v2),
        0.0,
    ]
}

impl EnsembleSummary {
    /// Jackknife a scalar statistic derived from the pooled moments.
    /// `stat(moments, n_paths, times)` must be a smooth function of the sums.
    pub fn jackknife<F: Fn(&[MomentRow], f64, &[f64]) -> f64>(&self, stat: F) -> (f64, f64) {
        let total = self.pooled();
        let full = stat(&total, self.n_paths as f64, &self.times);
        let b = self.block_moments.len();
        if b < 2 {
            return (full, 0.0);
        }
        let mut reps = Vec::with_capacity(b);
        for (bm, bs) in self.block_moments.iter().zip(&self.block_sizes) {
            let mut reduced = total.clone();
            for (r, rb) in reduced.iter_mut().zip(bm) {
                for k in 0..N_MOMENTS {
                    r[k] -= rb[k];
                }
            }
            reps.push(stat(&reduced, (self.n_paths - bs) as f64, &self.times));
        }
        let mean = reps.iter().sum::<f64>() / b as f64;
        let var = reps.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() * (b - 1) as f64
            / b as f64;
        (full, var.sqrt())
    }

    fn pooled(&self) -> Vec<MomentRow> {
        pairwise_reduce(self.block_moments.clone(), |mut a, b| {
            for (ra, rb) in a.iter_mut().zip(&b) {
                for k in 0..N_MOMENTS {
                    ra[k] += rb[k];
                }
            }
            a
        })
        .unwrap_or_default()
    }
}

/// Run an ensemble of exact-scheme paths and accumulate position moments.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    cfg.params.validate()?;
    if cfg.n_paths == 0 || !(cfg.dt > 0.0) || cfg.t_final < cfg.dt {
        return Err(PtwError::InvalidParameter("ensemble needs paths and T >= dt > 0".into()));
    }
    let n_steps = (cfg.t_final / cfg.dt - 1e-9).ceil() as usize;
    let save_every = cfg.save_every.max(1);
    let n_saves = n_steps / save_every;
    if n_saves == 0 {
        return Err(PtwError::InvalidParameter("save_every exceeds the step count".into()));
    }
    let times: Vec<f64> = (1..=n_saves).map(|k| (k * save_every) as f64 * cfg.dt).collect();
    let snap_steps: Vec<usize> =
        cfg.snapshot_times.iter().map(|&t| (t / cfg.dt).round() as usize).collect();
    for (&t, &s) in cfg.snapshot_times.iter().zip(&snap_steps) {
        if s > n_steps {
            return Err(PtwError::InvalidParameter(format!("snapshot time {t} beyond horizon")));
        }
    }

    let stepper = ExactStepper::new(&cfg.params, cfg.dt)?;
    let n_blocks = cfg.n_blocks.clamp(1, cfg.n_paths);
    let base = cfg.n_paths / n_blocks;
    let rem = cfg.n_paths % n_blocks;
    let ranges: Vec<(usize, usize)> = (0..n_blocks)
        .scan(0usize, |start, b| {
            let len = base + usize::from(b < rem);
            let r = (*start, *start + len);
            *start += len;
            Some(r)
        })
        .collect();

    let blocks: Vec<BlockResult> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut moments = vec![[0.0; N_MOMENTS]; n_saves];
            let mut snapshots: Vec<Vec<(f64, f64)>> =
                snap_steps.iter().map(|_| Vec::with_capacity(hi - lo)).collect();
            for path in lo..hi {
                let mut rng = stream_rng(cfg.seed, "ensemble-path", path as u64);
                let y0 = match &cfg.init {
                    InitSpec::Equilibrium => sample_invariant(&cfg.params, &mut rng)
                        .expect("equilibrium init requires the OU drift"),
                    InitSpec::Dirac { theta, kappa } => KineticState::new(*theta, *kappa),
                    InitSpec::UniformBox { theta, kappa } => {
                        use rand::Rng;
                        let th = theta.0 + rng.gen::<f64>() * (theta.1 - theta.0);
                        let k = kappa.0 + rng.gen::<f64>() * (kappa.1 - kappa.0);
                        KineticState::new(th, k)
                    }
                };
                let mut st = FullState::at_origin(y0);
                for (si, &ss) in snap_steps.iter().enumerate() {
                    if ss == 0 {
                        snapshots[si].push((st.theta_unwrapped, st.kappa));
                    }
                }
                for step in 1..=n_steps {
                    st = stepper.step(&cfg.params, &st, &mut rng);
                    if step % save_every == 0 {
                        let row = &mut moments[step / save_every - 1];
                        let [x1, x2] = st.x;
                        row[0] += x1;
                        row[1] += x2;
                        row[2] += x1 * x1;
                        row[3] += x2 * x2;
                        row[4] += x1 * x2;
                        row[5] += x1 * x1 * x1;
                        row[6] += x1 * x1 * x1 * x1;
                        row[7] += x2 * x2 * x2;
                        row[8] += x2 * x2 * x2 * x2;
                    }
                    for (si, &ss) in snap_steps.iter().enumerate() {
                        if step == ss {
                            snapshots[si].push((st.theta_unwrapped, st.kappa));
                        }
                    }
                }
            }
            BlockResult { n_paths: hi - lo, moments, snapshots }
        })
        .collect();

    let block_sizes: Vec<usize> = blocks.iter().map(|b| b.n_paths).collect();
    let block_moments: Vec<Vec<MomentRow>> = blocks.iter().map(|b| b.moments.clone()).collect();
    let total = pairwise_reduce(blocks, merge_blocks).expect("at least one block");

    let summary_stub = EnsembleSummary {
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        times: times.clone(),
        rows: Vec::new(),
        snapshots: cfg
            .snapshot_times
            .iter()
            .zip(total.snapshots)
            .map(|(&t, states)| Snapshot { t, states })
            .collect(),
        block_moments,
        block_sizes,
    };

    // per-time rows with jackknife SEs
    let pooled = summary_stub.pooled();
    let mut rows = Vec::with_capacity(n_saves);
    for (ti, &t) in times.iter().enumerate() {
        let full = stats_from_moments(&pooled[ti], cfg.n_paths as f64, t);
        let b = summary_stub.block_moments.len();
        let mut se = [0.0f64; 10];
        if b >= 2 {
            let mut reps = vec![[0.0f64; 10]; b];
            for (bi, (bm, bs)) in
                summary_stub.block_moments.iter().zip(&summary_stub.block_sizes).enumerate()
            {
                let mut reduced = pooled[ti];
                for k in 0..N_MOMENTS {
                    reduced[k] -= bm[ti][k];
                }
                reps[bi] = stats_from_moments(&reduced, (cfg.n_paths - bs) as f64, t);
            }
            for k in 0..10 {
                let mean = reps.iter().map(|r| r[k]).sum::<f64>() / b as f64;
                let var = reps.iter().map(|r| (r[k] - mean) * (r[k] - mean)).sum::<f64>()
                    * (b - 1) as f64
                    / b as f64;
                se[k] = var.sqrt();
            }
        }
        rows.push(TimeRow {
            t,
            mean: [full[0], full[1]],
            mean_se: [se[0], se[1]],
            var_over_t: [full[2], full[3]],
            var_over_t_se: [se[2], se[3]],
            cov_over_t: full[4],
            cov_over_t_se: se[4],
            skewness: [full[5], full[7]],
            skewness_se: [se[5], se[7]],
            excess_kurtosis: [full[6], full[8]],
            excess_kurtosis_se: [se[6], se[8]],
        });
    }

    Ok(EnsembleSummary { rows, ..summary_stub })
}

/// Per-time cross covariance `cov(x¹_t, x²_t)/t` with its standard error and
/// a flag for times where `|cov|/SE > 4`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCovRow {
    pub t: f64,
    pub cov_over_t: f64,
    pub se: f64,
    pub flagged: bool,
}

pub fn cross_covariance_xy(summary: &EnsembleSummary) -> Vec<CrossCovRow> {
    summary
        .rows
        .iter()
        .map(|r| CrossCovRow {
            t: r.t,
            cov_over_t: r.cov_over_t,
            se: r.cov_over_t_se,
            flagged: r.cov_over_t_se > 0.0 && (r.cov_over_t / r.cov_over_t_se).abs() > 4.0,
        })
        .collect()
}

/// Richardson extrapolation of `Var(x¹_t)/t = D - B/t` over the saved times
/// in `[t_lo, t_hi]`, with a jackknifed standard error.
pub fn richardson_var_over_t(summary: &EnsembleSummary, t_lo: f64, t_hi: f64) -> (f64, f64) {
    summary.jackknife(|moments, n, times| {
        let mut pts = Vec::new();
        for (ti, &t) in times.iter().enumerate() {
            if t >= t_lo && t <= t_hi {
                let s = stats_from_moments(&moments[ti], n, t);
                pts.push((1.0 / t, s[2]));
            }
        }
        // least squares of v = D - B * (1/t)
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = m * sxx - sx * sx;
        if denom.abs() < 1e-300 {
            return sy / m;
        }
        let slope = (m * sxy - sx * sy) / denom;
        (sy - slope * sx) / m
    })
}

/// One diffusively rescaled path sample: scaled displacement and terminal
/// kinetic state.
#[derive(Debug, Clone, Copy)]
pub struct CltSample {
    /// `ε·x¹` at the horizon (equals `ε ∫ cos θ` at unit speed).
    pub z1: f64,
    /// `ε·x²` at the horizon.
    pub z2: f64,
    pub y: KineticState,
}

/// Draw `n` independent rescaled samples `(ε x_{t/ε²}, y_{t/ε²})` from the
/// equilibrium ensemble.
pub fn clt_samples(
    params: &ModelParams,
    epsilon: f64,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<CltSample>> {
    if !(epsilon > 0.0) {
        return Err(PtwError::InvalidParameter("epsilon must be positive".into()));
    }
    let horizon = t / (epsilon * epsilon);
    let n_steps = (horizon / dt).round() as usize;
    let stepper = ExactStepper::new(params, dt)?;
    let n_blocks = 64.min(n);
    let base = n / n_blocks;
    let rem = n % n_blocks;
    let ranges: Vec<(usize, usize)> = (0..n_blocks)
        .scan(0usize, |start, b| {
            let len = base + usize::from(b < rem);
            let r = (*start, *start + len);
            *start += len;
            Some(r)
        })
        .collect();
    let chunks: Vec<Vec<CltSample>> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut out = Vec::with_capacity(hi - lo);
            for path in lo..hi {
                let mut rng = stream_rng(seed, "clt-path", path as u64);
                let y0 = sample_invariant(params, &mut rng).expect("OU drift");
                let mut st = FullState::at_origin(y0);
                for _ in 0..n_steps {
                    st = stepper.step(params, &st, &mut rng);
                }
                out.push(CltSample {
                    z1: epsilon * st.x[0],
                    z2: epsilon * st.x[1],
                    y: st.kinetic(),
                });
            }
            out
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Empirical L²(μ) decay of the semigroup applied to an observable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCurve {
    pub t: Vec<f64>,
    /// Debiased estimate of `‖P_t f‖_{L²(μ)}` (clipped at zero).
    pub norm: Vec<f64>,
    pub norm_se: Vec<f64>,
    /// Inner-noise floor subtracted at each time.
    pub noise_floor: Vec<f64>,
    /// Exponential rate fitted on points above the noise floor.
    pub fitted_rate: Option<f64>,
    pub fit_points: usize,
}

/// Nested Monte Carlo estimate of `t ↦ ‖P_t f‖_{L²(μ)}`.
///
/// Outer points are drawn from μ; `n_inner` exact paths from each outer
/// point estimate `P_t f(y)` with the inner-variance bias subtracted, so
/// the squared norm is unbiased. The observable must have zero μ-mean,
/// which is checked by Monte Carlo up front.
pub fn decay_estimate<F: Fn(&KineticState) -> f64 + Sync>(
    f: F,
    t_grid: &[f64],
    n_outer: usize,
    n_inner: usize,
    params: &ModelParams,
    dt: f64,
    seed: u64,
) -> Result<DecayCurve> {
    if t_grid.is_empty() || n_outer < 16 || n_inner < 2 {
        return Err(PtwError::InvalidParameter("decay estimate needs points and budgets".into()));
    }
    // zero-mean precondition, checked empirically
    {
        let mut rng = stream_rng(seed, "decay-meancheck", 0);
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let v = f(&sample_invariant(params, &mut rng)?);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let var = (s2 / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        if mean.abs() > (4.0 * se).max(1e-9) {
            return Err(PtwError::BadSample(format!(
                "observable has nonzero invariant mean ({mean:.4} vs SE {se:.2e})"
            )));
        }
    }

    let steps: Vec<usize> = t_grid.iter().map(|&t| (t / dt).round() as usize).collect();
    let max_step = *steps.iter().max().unwrap();
    let stepper = ExactStepper::new(params, dt)?;

    // per outer point: debiased (P_t f)^2 and the subtracted noise floor
    let per_outer: Vec<(Vec<f64>, Vec<f64>)> = (0..n_outer)
        .into_par_iter()
        .map(|o| {
            let mut rng = stream_rng(seed, "decay-outer", o as u64);
            let y = sample_invariant(params, &mut rng).expect("OU drift");
            let mut sums = vec![0.0; t_grid.len()];
            let mut sq = vec![0.0; t_grid.len()];
            for inner in 0..n_inner {
                let mut irng =
                    stream_rng(seed, "decay-inner", ((o as u64) << 32) | inner as u64);
                let (mut k, mut th) = (y.kappa, y.theta);
                for step in 1..=max_step {
                    let (k1, th1) = stepper.step_kinetic(k, th, &mut irng);
                    k = k1;
                    th = th1;
                    for (ti, &s) in steps.iter().enumerate() {
                        if s == step {
                            let v = f(&KineticState::new(th, k));
                            sums[ti] += v;
                            sq[ti] += v * v;
                        }
                    }
                }
                // t = 0 entries
                for (ti, &s) in steps.iter().enumerate() {
                    if s == 0 {
                        let v = f(&y);
                        sums[ti] += v;
                        sq[ti] += v * v;
                    }
                }
            }
            let nf = n_inner as f64;
            let mut sq_est = vec![0.0; t_grid.len()];
            let mut floor = vec![0.0; t_grid.len()];
            for ti in 0..t_grid.len() {
                let m = sums[ti] / nf;
                let v = (sq[ti] / nf - m * m).max(0.0) * nf / (nf - 1.0);
                sq_est[ti] = m * m - v / nf;
                floor[ti] = v / nf;
            }
            (sq_est, floor)
        })
        .collect();

    let nof = n_outer as f64;
    let mut norm = Vec::with_capacity(t_grid.len());
    let mut norm_se = Vec::with_capacity(t_grid.len());
    let mut noise_floor = Vec::with_capacity(t_grid.len());
    for ti in 0..t_grid.len() {
        let vals: Vec<f64> = per_outer.iter().map(|(s, _)| s[ti]).collect();
        let mean = vals.iter().sum::<f64>() / nof;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nof - 1.0);
        let se_sq = (var / nof).sqrt();
        let n = mean.max(0.0).sqrt();
        norm.push(n);
        norm_se.push(if n > 1e-12 { se_sq / (2.0 * n) } else { se_sq.sqrt() });
        noise_floor.push(per_outer.iter().map(|(_, f)| f[ti]).sum::<f64>() / nof);
    }

    // exponential fit on times where the signal clears the noise
    let mut pts = Vec::new();
    for ti in 0..t_grid.len() {
        if norm[ti] > 0.0 && norm[ti] * norm[ti] > 2.0 * noise_floor[ti] / (nof).sqrt()
            && norm[ti] > 2.0 * norm_se[ti]
        {
            pts.push((t_grid[ti], norm[ti].ln()));
        }
    }
    let fitted_rate = if pts.len() >= 3 {
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = m * sxx - sx * sx;
        if denom > 0.0 {
            Some(-(m * sxy - sx * sy) / denom)
        } else {
            None
        }
    } else {
        None
    };

    Ok(DecayCurve {
        t: t_grid.to_vec(),
        norm,
        norm_se,
        noise_floor,
        fitted_rate,
        fit_points: pts.len(),
    })
}

/// Running time-average `t ↦ (1/t) ∫₀^t f(y_s) ds` along one trajectory
/// (trapezoid rule; starts at the first frame after 0).
pub fn ergodic_average<F: Fn(&KineticState) -> f64>(traj: &Trajectory, f: F) -> Vec<(f64, f64)> {
    let vals: Vec<f64> = traj.frames.iter().map(|fr| f(&fr.kinetic())).collect();
    let mut out = Vec::with_capacity(vals.len().saturating_sub(1));
    let mut acc = 0.0;
    for i in 1..vals.len() {
        acc += 0.5 * traj.dt * (vals[i - 1] + vals[i]);
        out.push((traj.times[i], acc / traj.times[i]));
    }
    out
}

/// Ensemble started out of equilibrium (Dirac point or compact box); same
/// summary as [`run_ensemble`].
pub fn out_of_equilibrium_run(init: InitSpec, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    if init == InitSpec::Equilibrium {
        return Err(PtwError::InvalidParameter(
            "out-of-equilibrium run needs a non-equilibrium init".into(),
        ));
    }
    let mut cfg = cfg.clone();
    cfg.init = init;
    run_ensemble(&cfg)
}

/// Monte Carlo estimate of the stationary velocity autocorrelation
/// `C(s) = E_μ[cos(θ_s - θ_0)]` on the grid `s = 0, ds, ..., s_max`, with
/// per-lag standard errors. The step equals the lag spacing, so every lag
/// is sampled from the exact transition.
pub fn empirical_velocity_autocorrelation(
    params: &ModelParams,
    n_paths: usize,
    s_max: f64,
    ds: f64,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>> {
    let n_lags = (s_max / ds).round() as usize;
    let stepper = ExactStepper::new(params, ds)?;
    let n_blocks = 100.min(n_paths);
    let base = n_paths / n_blocks;
    let rem = n_paths % n_blocks;
    let ranges: Vec<(usize, usize)> = (0..n_blocks)
        .scan(0usize, |start, b| {
            let len = base + usize::from(b < rem);
            let r = (*start, *start + len);
            *start += len;
            Some(r)
        })
        .collect();
    let blocks: Vec<(Vec<f64>, Vec<f64>, usize)> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut s1 = vec![0.0; n_lags + 1];
            let mut s2 = vec![0.0; n_lags + 1];
            for path in lo..hi {
                let mut rng = stream_rng(seed, "autocorr-path", path as u64);
                let y0 = sample_invariant(params, &mut rng).expect("OU drift");
                let (mut k, mut th) = (y0.kappa, y0.theta);
                s1[0] += 1.0;
                s2[0] += 1.0;
                for lag in 1..=n_lags {
                    let (k1, th1) = stepper.step_kinetic(k, th, &mut rng);
                    k = k1;
                    th = th1;
                    let c = (th - y0.theta).cos();
                    s1[lag] += c;
                    s2[lag] += c * c;
                }
            }
            (s1, s2, hi - lo)
        })
        .collect();
    let total = pairwise_reduce(blocks, |mut a, b| {
        for (x, y) in a.0.iter_mut().zip(&b.0) {
            *x += y;
        }
        for (x, y) in a.1.iter_mut().zip(&b.1) {
            *x += y;
        }
        a.2 += b.2;
        a
    })
    .expect("blocks");
    let nf = total.2 as f64;
    Ok((0..=n_lags)
        .map(|lag| {
            let mean = total.0[lag] / nf;
            let var = (total.1[lag] / nf - mean * mean).max(0.0);
            (lag as f64 * ds, mean, (var / nf).sqrt())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{transition_law, velocity_autocorrelation};
    use crate::model::observables;
    use crate::sim::{simulate_path, Scheme};

    fn ou(alpha: f64) -> ModelParams {
        ModelParams::ou(alpha).unwrap()
    }

    #[test]
    fn smoke_run_satisfies_invariants() {
        let cfg = EnsembleConfig::new(ou(1.0), 10, 2.0, 0.05, 7);
        let s = run_ensemble(&cfg).unwrap();
        assert!(!s.rows.is_empty());
        for r in &s.rows {
            assert!(r.var_over_t[0] >= 0.0 && r.var_over_t[1] >= 0.0);
            assert!(r.var_over_t_se[0] >= 0.0);
        }
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let cfg = EnsembleConfig::new(ou(1.0), 400, 1.0, 0.02, 9);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_ensemble(&cfg).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.var_over_t, rb.var_over_t);
            assert_eq!(ra.cov_over_t, rb.cov_over_t);
            assert_eq!(ra.mean, rb.mean);
        }
    }

    #[test]
    fn standard_errors_scale_like_inverse_sqrt_n() {
        let mut cfg = EnsembleConfig::new(ou(1.0), 10_000, 4.0, 0.02, 11);
        cfg.n_blocks = 200;
        let small = run_ensemble(&cfg).unwrap();
        cfg.n_paths = 20_000;
        let big = run_ensemble(&cfg).unwrap();
        let last = small.rows.len() - 1;
        let ratio = small.rows[last].var_over_t_se[0] / big.rows[last].var_over_t_se[0];
        assert!(
            (ratio - std::f64::consts::SQRT_2).abs() <= 0.1 * std::f64::consts::SQRT_2,
            "SE ratio {ratio}"
        );
    }

    #[test]
    fn mean_displacement_centered_at_equilibrium() {
        let cfg = EnsembleConfig::new(ou(1.0), 20_000, 8.0, 0.02, 13);
        let s = run_ensemble(&cfg).unwrap();
        for r in &s.rows {
            for c in 0..2 {
                assert!(
                    r.mean[c].abs() <= 4.0 * r.mean_se[c],
                    "t={}: mean {} vs se {}",
                    r.t,
                    r.mean[c],
                    r.mean_se[c]
                );
            }
        }
    }

    #[test]
    fn var_over_t_increases_toward_limit() {
        let cfg = EnsembleConfig::new(ou(1.0), 40_000, 20.0, 0.02, 17);
        let s = run_ensemble(&cfg).unwrap();
        let d = crate::diffusion::compute_d_closed_form(1.0).unwrap();
        for r in &s.rows {
            assert!(
                r.var_over_t[0] <= d + 4.0 * r.var_over_t_se[0],
                "t={}: var/t {} above D={d}",
                r.t,
                r.var_over_t[0]
            );
        }
    }

    #[test]
    fn frozen_angle_cov_is_zero() {
        // deterministic straight-line paths: empirical covariance is exactly 0
        let mut cfg = EnsembleConfig::new(ou(1e-12), 50, 1.0, 0.05, 3);
        cfg.init = InitSpec::Dirac { theta: 0.7, kappa: 0.0 };
        let s = run_ensemble(&cfg).unwrap();
        for r in &s.rows {
            assert!(r.cov_over_t.abs() < 1e-12);
        }
    }

    #[test]
    fn antithetic_reflection_negates_covariance() {
        // mirroring theta0 -> -theta0, kappa0 -> -kappa0 with negated normals
        // flips x2 and keeps x1, so the empirical covariance flips sign
        let params = ou(1.0);
        let dt = 0.02;
        let stepper = ExactStepper::new(&params, dt).unwrap();
        let n = 64;
        let n_steps = 100;
        let mut xs = Vec::new();
        let mut xs_m = Vec::new();
        for path in 0..n {
            let mut rng = stream_rng(23, "antithetic", path);
            let y0 = sample_invariant(&params, &mut rng).unwrap();
            let mut st = FullState::at_origin(y0);
            let mut st_m =
                FullState::at_origin(KineticState::new(-y0.theta, -y0.kappa));
            use rand::Rng;
            for _ in 0..n_steps {
                let z1: f64 = rng.sample(rand_distr::StandardNormal);
                let z2: f64 = rng.sample(rand_distr::StandardNormal);
                st = stepper.step_with_normals(&params, &st, z1, z2);
                st_m = stepper.step_with_normals(&params, &st_m, -z1, -z2);
            }
            xs.push(st.x);
            xs_m.push(st_m.x);
        }
        let cov = |v: &[[f64; 2]]| {
            let n = v.len() as f64;
            let m1 = v.iter().map(|x| x[0]).sum::<f64>() / n;
            let m2 = v.iter().map(|x| x[1]).sum::<f64>() / n;
            v.iter().map(|x| (x[0] - m1) * (x[1] - m2)).sum::<f64>() / n
        };
        for (a, b) in xs.iter().zip(&xs_m) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
        assert!((cov(&xs) + cov(&xs_m)).abs() < 1e-12);
    }

    #[test]
    fn dirac_snapshot_matches_transition_law() {
        let params = ou(1.0);
        let t = 2.0f64.ln();
        let mut cfg = EnsembleConfig::new(params.clone(), 100_000, t, t / 64.0, 29);
        cfg.save_every = 64;
        cfg.snapshot_times = vec![t];
        cfg.init = InitSpec::Dirac { theta: 0.0, kappa: 0.0 };
        let s = run_ensemble(&cfg).unwrap();
        let snap = &s.snapshots[0];
        let law = transition_law(t, (0.0, 0.0), 1.0).unwrap();
        let nf = snap.states.len() as f64;
        let mk = snap.states.iter().map(|s| s.1).sum::<f64>() / nf;
        let mth = snap.states.iter().map(|s| s.0).sum::<f64>() / nf;
        let ckk = snap.states.iter().map(|s| (s.1 - mk) * (s.1 - mk)).sum::<f64>() / nf;
        let cthth = snap.states.iter().map(|s| (s.0 - mth) * (s.0 - mth)).sum::<f64>() / nf;
        let ckth = snap.states.iter().map(|s| (s.1 - mk) * (s.0 - mth)).sum::<f64>() / nf;
        let band = |cii: f64, cjj: f64, cij: f64| 4.0 * ((cii * cjj + cij * cij) / nf).sqrt();
        assert!((ckk - law.cov[0][0]).abs() < band(law.cov[0][0], law.cov[0][0], law.cov[0][0]));
        assert!((cthth - law.cov[1][1]).abs() < band(law.cov[1][1], law.cov[1][1], law.cov[1][1]));
        assert!((ckth - law.cov[0][1]).abs() < band(law.cov[0][0], law.cov[1][1], law.cov[0][1]));
    }

    #[test]
    fn ergodic_average_of_one_is_one() {
        let params = ou(1.0);
        let mut rng = stream_rng(5, "erg-one", 0);
        let init = FullState::at_origin(sample_invariant(&params, &mut rng).unwrap());
        let traj = simulate_path(&params, Scheme::ExactKinetic, 5.0, 0.01, &init, &mut rng).unwrap();
        for (_, avg) in ergodic_average(&traj, |_| 1.0) {
            assert!((avg - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ergodic_average_cos_theta_within_clt_band() {
        let params = ou(1.0);
        let mut rng = stream_rng(5, "erg-cos", 0);
        let init = FullState::at_origin(sample_invariant(&params, &mut rng).unwrap());
        let t_final = 10_000.0;
        let traj =
            simulate_path(&params, Scheme::ExactKinetic, t_final, 0.01, &init, &mut rng).unwrap();
        let avg = ergodic_average(&traj, observables::cos_theta).last().unwrap().1;
        let d = crate::diffusion::compute_d_closed_form(1.0).unwrap();
        assert!(avg.abs() <= 4.0 * (d / t_final).sqrt(), "avg {avg}");

        // kappa^2 averages to alpha^2; asymptotic variance for kappa^2-alpha^2
        // is 2 alpha^4 (its Poisson solution is -(kappa^2-alpha^2)/2)
        let avg_k2 = ergodic_average(&traj, |y| y.kappa * y.kappa).last().unwrap().1;
        assert!((avg_k2 - 1.0).abs() <= 4.0 * (2.0f64 / t_final).sqrt(), "avg kappa^2 {avg_k2}");
    }

    #[test]
    fn decay_estimate_cos_theta() {
        let params = ou(1.0);
        let t_grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        let curve =
            decay_estimate(observables::cos_theta, &t_grid, 400, 64, &params, 0.01, 31).unwrap();
        // t = 0: ||f|| = 1/sqrt(2)
        let target0 = 0.5f64.sqrt();
        assert!(
            (curve.norm[0] - target0).abs() <= (4.0 * curve.norm_se[0]).max(0.01),
            "norm(0) = {} vs {target0}",
            curve.norm[0]
        );
        // analytic envelope: the conditional mean angle drops out against
        // the uniform theta0, leaving ||P_t f|| = e^{-c_theta(t)/2}/sqrt(2)
        // with c_theta the conditional angle variance
        for (i, &t) in t_grid.iter().enumerate() {
            let var_t = transition_law(t, (0.0, 0.0), 1.0).unwrap().cov[1][1];
            let envelope = (-var_t / 2.0).exp() / 2.0f64.sqrt();
            if envelope > 0.02 {
                assert!(
                    (curve.norm[i] - envelope).abs() <= (4.0 * curve.norm_se[i]).max(0.15 * envelope),
                    "t={t}: norm {} vs envelope {envelope}",
                    curve.norm[i]
                );
            }
        }
        let rate = curve.fitted_rate.expect("fit");
        assert!(rate >= 0.5, "fitted rate {rate}");
    }

    #[test]
    fn decay_estimate_rejects_constant() {
        let params = ou(1.0);
        assert!(decay_estimate(|_| 1.0, &[0.0, 1.0], 64, 8, &params, 0.05, 3).is_err());
    }

    #[test]
    fn empirical_autocorrelation_matches_formula() {
        let params = ou(1.0);
        let curve = empirical_velocity_autocorrelation(&params, 20_000, 4.0, 0.1, 37).unwrap();
        assert_eq!(curve[0].1, 1.0);
        for &(s, c, se) in &curve {
            let target = velocity_autocorrelation(s, 1.0);
            assert!((c - target).abs() <= (4.0 * se).max(1e-12), "s={s}: {c} vs {target}");
        }
    }

    #[test]
    fn clt_samples_variance_in_prediffusive_regime() {
        // epsilon = 1 (t = 1, no rescaling): variance well below the
        // diffusive limit
        let params = ou(1.0);
        let samples = clt_samples(&params, 1.0, 1.0, 0.01, 10_000, 41).unwrap();
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.z1).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.z1 - mean) * (s.z1 - mean)).sum::<f64>() / n;
        let d = crate::diffusion::compute_d_closed_form(1.0).unwrap();
        let se = (2.0 / n).sqrt() * var;
        assert!(var + 4.0 * se < d, "var {var} not below D {d}");
    }
}
