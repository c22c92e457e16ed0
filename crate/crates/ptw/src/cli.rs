//! Command-line drivers: reproducible experiments with machine-readable
//! outputs. Curves go to CSV, scalars and metadata to JSON; every run writes
//! a `run.json` echoing the fully resolved configuration (the timestamp is
//! isolated there so data files are byte-identical across reruns).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diffusion::{compute_d_closed_form, compute_d_quadrature, green_kubo, CutoffRule};
use crate::error::PtwError;
use crate::model::{sample_invariant, FullState, KineticState, ModelParams, SpeedProfile};
use crate::poisson::{solve_poisson, Grid, OperatorOptions, ThetaScheme};
use crate::rng::stream_rng;
use crate::sim::{simulate_path, Scheme, Trajectory};
use crate::stats::{
    empirical_velocity_autocorrelation, run_ensemble, EnsembleConfig, EnsembleSummary, InitSpec,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_DESCRIBE: &str = env!("PTW_GIT_DESCRIBE");

/// Exit codes: 0 success, 1 test failure, 2 configuration error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_TEST_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ptw",
    version,
    about = "Persistent turning walker: simulation, Poisson solver, diffusion constant, ensembles"
)]
pub struct Cli {
    /// Master seed (env PTW_SEED overrides).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (0 = rayon default). Output is independent of this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Output directory.
    #[arg(long, global = true, default_value = "ptw-out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Compute the diffusion constant.
    Diffusion(DiffusionArgs),
    /// Solve the Poisson equation on the cylinder grid.
    Poisson(PoissonArgs),
    /// Run a position-moment ensemble.
    Ensemble(EnsembleArgs),
    /// Run the acceptance suite and write a pass/fail report.
    Tests(TestsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// α=1, c(|κ|)=1/(1+2|κ|), T=10, one point per 0.1 time units.
    Figure1,
    /// α=1, equilibrium start, n=10⁵ paths, T=40, dt=0.01.
    Figure2,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub preset: Option<Preset>,
    /// Noise amplitude (required unless a preset supplies it).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Speed profile: "unit" or "rational:a,b".
    #[arg(long)]
    pub speed: Option<String>,
    /// Curvature drift: "ou" or "power:p".
    #[arg(long)]
    pub drift: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// exact | euler
    #[arg(long, default_value = "exact")]
    pub scheme: String,
    /// Save one frame every this many steps.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Dirac initial angle (default: equilibrium draw).
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Dirac initial curvature (default: equilibrium draw).
    #[arg(long)]
    pub kappa0: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffusionArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub rel_tol: f64,
    /// quadrature | closed-form | green-kubo
    #[arg(long, default_value = "quadrature")]
    pub method: String,
    /// Paths for the green-kubo autocorrelation ensemble.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Autocorrelation horizon for green-kubo.
    #[arg(long, default_value_t = 15.0)]
    pub smax: f64,
    /// Autocorrelation lag spacing for green-kubo.
    #[arg(long, default_value_t = 0.05)]
    pub ds: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PoissonArgs {
    /// cos-theta | minus-kappa | kappa-sq
    #[arg(long, default_value = "cos-theta")]
    pub f: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Grid as "n_theta x n_kappa", e.g. 128x257.
    #[arg(long, default_value = "128x257")]
    pub grid: String,
    /// Curvature truncation K.
    #[arg(long, default_value_t = 6.0)]
    pub kcut: f64,
    /// upwind3 | upwind1
    #[arg(long, default_value = "upwind3")]
    pub theta_scheme: String,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Statistics row spacing in time units.
    #[arg(long, default_value_t = 0.5)]
    pub save_dt: f64,
    /// equilibrium | dirac:theta,kappa | box:th_lo,th_hi,k_lo,k_hi
    #[arg(long, default_value = "equilibrium")]
    pub init: String,
    /// Comma-separated snapshot times.
    #[arg(long)]
    pub snapshots: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TestsArgs {
    /// Run only these comma-separated criterion ids (1..=11).
    #[arg(long)]
    pub only: Option<String>,
}

/// Parsed speed profile strings.
fn parse_speed(s: &str) -> Result<SpeedProfile, PtwError> {
    if s == "unit" {
        return Ok(SpeedProfile::Unit);
    }
    if let Some(rest) = s.strip_prefix("rational:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() == 2 {
            if let (Ok(a), Ok(b)) = (parts[0].parse(), parts[1].parse()) {
                return Ok(SpeedProfile::RationalDecay { a, b });
            }
        }
    }
    Err(bad_flag("speed", s))
}

fn parse_drift(s: &str) -> Result<crate::model::DriftSpec, PtwError> {
    if s == "ou" {
        return Ok(crate::model::DriftSpec::Ou);
    }
    if let Some(rest) = s.strip_prefix("power:") {
        if let Ok(p) = rest.parse() {
            return Ok(crate::model::DriftSpec::PowerLaw { p });
        }
    }
    Err(bad_flag("drift", s))
}

fn bad_flag(flag: &str, val: &str) -> PtwError {
    PtwError::InvalidParameter(format!("unrecognized --{flag} value '{val}'"))
}

fn parse_grid(s: &str) -> Result<(usize, usize), PtwError> {
    let parts: Vec<&str> = s.split('x').collect();
    if parts.len() == 2 {
        if let (Ok(nt), Ok(nk)) = (parts[0].parse(), parts[1].parse()) {
            return Ok((nt, nk));
        }
    }
    Err(bad_flag("grid", s))
}

fn parse_init(s: &str) -> Result<InitSpec, PtwError> {
    if s == "equilibrium" {
        return Ok(InitSpec::Equilibrium);
    }
    if let Some(rest) = s.strip_prefix("dirac:") {
        let p: Vec<&str> = rest.split(',').collect();
        if p.len() == 2 {
            if let (Ok(theta), Ok(kappa)) = (p[0].parse(), p[1].parse()) {
                return Ok(InitSpec::Dirac { theta, kappa });
            }
        }
    }
    if let Some(rest) = s.strip_prefix("box:") {
        let p: Vec<&str> = rest.split(',').collect();
        if p.len() == 4 {
            let v: Result<Vec<f64>, _> = p.iter().map(|x| x.parse()).collect();
            if let Ok(v) = v {
                return Ok(InitSpec::UniformBox { theta: (v[0], v[1]), kappa: (v[2], v[3]) });
            }
        }
    }
    Err(bad_flag("init", s))
}

/// CSV export of a trajectory (unwrapped θ), one row per saved frame.
pub fn trajectory_to_csv(traj: &Trajectory, stride: usize) -> String {
    let mut out = String::from("t,x1,x2,theta,kappa\n");
    let stride = stride.max(1);
    for (i, fr) in traj.frames.iter().enumerate().skip(stride).step_by(stride) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            traj.times[i], fr.x[0], fr.x[1], fr.theta_unwrapped, fr.kappa
        ));
    }
    out
}

/// CSV export of an ensemble summary.
pub fn ensemble_to_csv(s: &EnsembleSummary) -> String {
    let mut out = String::from(
        "t,var1_over_t,se1,var2_over_t,se2,cov,se_cov,mean1,se_mean1,mean2,se_mean2,skew1,se_skew1,kurt1,se_kurt1,skew2,se_skew2,kurt2,se_kurt2\n",
    );
    for r in &s.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.t,
            r.var_over_t[0],
            r.var_over_t_se[0],
            r.var_over_t[1],
            r.var_over_t_se[1],
            r.cov_over_t,
            r.cov_over_t_se,
            r.mean[0],
            r.mean_se[0],
            r.mean[1],
            r.mean_se[1],
            r.skewness[0],
            r.skewness_se[0],
            r.excess_kurtosis[0],
            r.excess_kurtosis_se[0],
            r.skewness[1],
            r.skewness_se[1],
            r.excess_kurtosis[1],
            r.excess_kurtosis_se[1],
        ));
    }
    out
}

/// CSV export of a Poisson solution.
pub fn poisson_to_csv(grid: &Grid, g: &[f64]) -> String {
    let mut out = String::from("theta,kappa,g\n");
    for i in 0..grid.n_theta {
        for j in 0..grid.n_kappa {
            out.push_str(&format!("{},{},{}\n", grid.theta(i), grid.kappa(j), g[grid.idx(i, j)]));
        }
    }
    out
}

#[derive(Serialize)]
struct RunMeta<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    threads: usize,
    version: &'a str,
    git_describe: &'a str,
    timestamp_unix: u64,
    config: C,
}

fn write_run_json<C: Serialize>(dir: &Path, command: &str, seed: u64, threads: usize, config: C) {
    let meta = RunMeta {
        command,
        seed,
        threads,
        version: VERSION,
        git_describe: GIT_DESCRIBE,
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config,
    };
    let _ = fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta).unwrap());
}

/// Execute a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let seed = match std::env::var("PTW_SEED") {
        Ok(v) => match v.parse() {
            Ok(s) => s,
            Err(_) => {
                eprintln!("error: PTW_SEED must be an unsigned integer, got '{v}'");
                return EXIT_CONFIG;
            }
        },
        Err(_) => cli.seed,
    };
    if cli.threads > 0 {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output dir {}: {e}", cli.out.display());
        return EXIT_CONFIG;
    }
    let out = cli.out.clone();
    let threads = cli.threads;
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&out, seed, threads, args),
        Command::Diffusion(args) => cmd_diffusion(&out, seed, threads, args),
        Command::Poisson(args) => cmd_poisson(&out, seed, threads, args),
        Command::Ensemble(args) => cmd_ensemble(&out, seed, threads, args),
        Command::Tests(args) => return cmd_tests(&out, seed, threads, args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

#[derive(Serialize)]
struct SimulateConfig {
    params: ModelParams,
    scheme: Scheme,
    t: f64,
    dt: f64,
    stride: usize,
    init: String,
}

fn cmd_simulate(out: &Path, seed: u64, threads: usize, args: SimulateArgs) -> crate::Result<()> {
    let preset_fig1 = args.preset == Some(Preset::Figure1);
    let alpha = args.alpha.or(if preset_fig1 { Some(1.0) } else { None }).ok_or_else(|| {
        PtwError::InvalidParameter("--alpha is required (or use --preset figure1)".into())
    })?;
    let speed = match &args.speed {
        Some(s) => parse_speed(s)?,
        None if preset_fig1 => SpeedProfile::RationalDecay { a: 1.0, b: 2.0 },
        None => SpeedProfile::Unit,
    };
    let drift = match &args.drift {
        Some(d) => parse_drift(d)?,
        None => crate::model::DriftSpec::Ou,
    };
    let params = ModelParams { alpha, speed, drift };
    params.validate()?;
    let t = args.t.unwrap_or(if preset_fig1 { 10.0 } else { 40.0 });
    let dt = args.dt.unwrap_or(1e-3);
    let stride = args.stride.unwrap_or(if preset_fig1 { 100 } else { 1 });
    let scheme = match args.scheme.as_str() {
        "exact" => Scheme::ExactKinetic,
        "euler" => Scheme::EulerMaruyama,
        other => return Err(bad_flag("scheme", other)),
    };

    let mut rng = stream_rng(seed, "simulate", 0);
    let (init, init_desc) = match (args.theta0, args.kappa0) {
        (Some(th), Some(k)) => {
            (FullState::at_origin(KineticState::new(th, k)), format!("dirac:{th},{k}"))
        }
        (None, None) => {
            let eq = ModelParams { speed: SpeedProfile::Unit, ..params.clone() };
            (FullState::at_origin(sample_invariant(&eq, &mut rng)?), "equilibrium".to_string())
        }
        _ => {
            return Err(PtwError::InvalidParameter(
                "--theta0 and --kappa0 must be given together".into(),
            ))
        }
    };

    let traj = simulate_path(&params, scheme, t, dt, &init, &mut rng)?;
    fs::write(out.join("trajectory.csv"), trajectory_to_csv(&traj, stride))
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    write_run_json(
        out,
        "simulate",
        seed,
        threads,
        SimulateConfig { params, scheme, t, dt, stride, init: init_desc },
    );
    println!("wrote {}", out.join("trajectory.csv").display());
    Ok(())
}

#[derive(Serialize)]
struct DiffusionReport {
    alpha: f64,
    d: f64,
    error_bound: f64,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff_index: Option<usize>,
}

fn cmd_diffusion(out: &Path, seed: u64, threads: usize, args: DiffusionArgs) -> crate::Result<()> {
    let report = match args.method.as_str() {
        "quadrature" => {
            let q = compute_d_quadrature(args.alpha, args.rel_tol)?;
            DiffusionReport {
                alpha: args.alpha,
                d: q.value,
                error_bound: q.abs_error_bound,
                method: "quadrature".into(),
                evaluations: Some(q.evaluations),
                truncation_t: Some(q.truncation_t),
                cutoff_index: None,
            }
        }
        "closed-form" => {
            let d = compute_d_closed_form(args.alpha)?;
            DiffusionReport {
                alpha: args.alpha,
                d,
                error_bound: 1e-12 * d,
                method: "closed-form".into(),
                evaluations: None,
                truncation_t: None,
                cutoff_index: None,
            }
        }
        "green-kubo" => {
            let params = ModelParams::ou(args.alpha)?;
            let curve =
                empirical_velocity_autocorrelation(&params, args.paths, args.smax, args.ds, seed)?;
            let mut csv = String::from("s,c,se\n");
            for &(s, c, se) in &curve {
                csv.push_str(&format!("{s},{c},{se}\n"));
            }
            fs::write(out.join("autocorrelation.csv"), csv)
                .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
            let gk = green_kubo(&curve, CutoffRule::NoiseFloor)?;
            DiffusionReport {
                alpha: args.alpha,
                d: gk.value,
                error_bound: gk.std_error,
                method: "green-kubo".into(),
                evaluations: None,
                truncation_t: None,
                cutoff_index: Some(gk.cutoff_index),
            }
        }
        other => return Err(bad_flag("method", other)),
    };
    let json = serde_json::to_string_pretty(&report).unwrap();
    fs::write(out.join("diffusion.json"), &json)
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    write_run_json(out, "diffusion", seed, threads, args);
    println!("{json}");
    Ok(())
}

#[derive(Serialize)]
struct PoissonReport {
    alpha: f64,
    f: String,
    n_theta: usize,
    n_kappa: usize,
    kappa_cut: f64,
    theta_scheme: String,
    v_f: f64,
    v_f_alt: f64,
    residual_inf: f64,
    defect: f64,
    mean_projection: f64,
}

fn cmd_poisson(out: &Path, seed: u64, threads: usize, args: PoissonArgs) -> crate::Result<()> {
    let (nt, nk) = parse_grid(&args.grid)?;
    let grid = Grid::new(nt, nk, args.kcut)?;
    let opts = OperatorOptions {
        theta_scheme: match args.theta_scheme.as_str() {
            "upwind3" => ThetaScheme::Upwind3,
            "upwind1" => ThetaScheme::Upwind1,
            other => return Err(bad_flag("theta-scheme", other)),
        },
    };
    let alpha = args.alpha;
    let f: Vec<f64> = match args.f.as_str() {
        "cos-theta" => grid.sample(|th, _| th.cos()),
        "minus-kappa" => grid.sample(|_, k| -k),
        "kappa-sq" => grid.sample(|_, k| k * k - alpha * alpha),
        other => return Err(bad_flag("f", other)),
    };
    let sol = solve_poisson(&f, &grid, alpha, &opts)?;
    fs::write(out.join("poisson_g.csv"), poisson_to_csv(&grid, &sol.g))
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    let report = PoissonReport {
        alpha,
        f: args.f.clone(),
        n_theta: nt,
        n_kappa: nk,
        kappa_cut: args.kcut,
        theta_scheme: args.theta_scheme.clone(),
        v_f: sol.v_f,
        v_f_alt: sol.v_f_alt,
        residual_inf: sol.residual_inf,
        defect: sol.defect,
        mean_projection: sol.mean_projection,
    };
    let json = serde_json::to_string_pretty(&report).unwrap();
    fs::write(out.join("poisson.json"), &json)
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    write_run_json(out, "poisson", seed, threads, args);
    println!("{json}");
    Ok(())
}

fn cmd_ensemble(out: &Path, seed: u64, threads: usize, args: EnsembleArgs) -> crate::Result<()> {
    let fig2 = args.preset == Some(Preset::Figure2);
    let alpha = args.alpha.or(if fig2 { Some(1.0) } else { None }).ok_or_else(|| {
        PtwError::InvalidParameter("--alpha required (or --preset figure2)".into())
    })?;
    let params = ModelParams::ou(alpha)?;
    let n_paths = args.paths.unwrap_or(if fig2 { 100_000 } else { 10_000 });
    let t = args.t.unwrap_or(if fig2 { 40.0 } else { 10.0 });
    let dt = args.dt.unwrap_or(0.01);
    let mut cfg = EnsembleConfig::new(params, n_paths, t, dt, seed);
    cfg.save_every = ((args.save_dt / dt).round() as usize).max(1);
    cfg.init = parse_init(&args.init)?;
    if let Some(snaps) = &args.snapshots {
        cfg.snapshot_times = snaps
            .split(',')
            .map(|s| s.parse().map_err(|_| bad_flag("snapshots", snaps)))
            .collect::<Result<_, _>>()?;
    }
    let summary = run_ensemble(&cfg)?;
    fs::write(out.join("ensemble.csv"), ensemble_to_csv(&summary))
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    #[derive(Serialize)]
    struct EnsembleReport<'a> {
        config: &'a EnsembleConfig,
        git_describe: &'a str,
        terminal_var1_over_t: f64,
        terminal_se1: f64,
    }
    let last = summary.rows.last().unwrap();
    let json = serde_json::to_string_pretty(&EnsembleReport {
        config: &cfg,
        git_describe: GIT_DESCRIBE,
        terminal_var1_over_t: last.var_over_t[0],
        terminal_se1: last.var_over_t_se[0],
    })
    .unwrap();
    fs::write(out.join("ensemble.json"), &json)
        .map_err(|e| PtwError::InvalidParameter(format!("write failed: {e}")))?;
    write_run_json(out, "ensemble", seed, threads, args);
    println!("wrote {}", out.join("ensemble.csv").display());
    Ok(())
}

fn cmd_tests(out: &Path, seed: u64, threads: usize, args: TestsArgs) -> i32 {
    let only: Option<Vec<u32>> =
        args.only.as_ref().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let acc = crate::acceptance::Acceptance::new(seed);
    let results = acc.run(only.as_deref());
    for r in &results {
        println!("{}", r.summary_line());
        for d in &r.details {
            println!("    {d}");
        }
    }
    let all_pass = results.iter().all(|r| r.passed);
    #[derive(Serialize)]
    struct Report<'a> {
        seed: u64,
        version: &'a str,
        git_describe: &'a str,
        all_pass: bool,
        criteria: &'a [crate::acceptance::CriterionResult],
    }
    let json = serde_json::to_string_pretty(&Report {
        seed,
        version: VERSION,
        git_describe: GIT_DESCRIBE,
        all_pass,
        criteria: &results,
    })
    .unwrap();
    let _ = fs::write(out.join("acceptance.json"), &json);
    write_run_json(out, "tests", seed, threads, args);
    if all_pass {
        EXIT_OK
    } else {
        EXIT_TEST_FAILURE
    }
}
