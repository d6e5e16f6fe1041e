//! Command-line front end.
//!
//! Reads an MPS file, solves it with the chosen method and writes
//! `trajectory.csv` and `summary.json` into the output directory. Sweep
//! flags run the cartesian product of the given grids, one output
//! subdirectory per combination.
//!
//! Exit codes: 0 when the run (every run, in a sweep) reached tolerance,
//! 2 when one stopped on the iteration or wall-clock limit, 1 on bad input.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Parser;
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::anderson::Regularization;
use crate::lp_model::mps::parse_mps_file;
use crate::lp_model::{to_standard_form, ProblemData};
use crate::solver::{solve, write_csv, Method, SolveResult, SolveStatus, SolverConfig, StepRule, TrajectoryRecord};

/// Environment variable holding the number of parallel sweep workers.
pub const WORKERS_ENV: &str = "AAPDHG_WORKERS";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "aapdhg",
    version,
    about = "PDHG, Anderson-accelerated PDHG and filtered AA-PDHG for linear programs in MPS format",
    args_override_self = true
)]
pub struct Args {
    /// MPS instance to solve.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// pdhg, aa-pdhg or faa-pdhg.
    #[arg(long)]
    pub method: Option<Method>,
    /// AA memory size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Safeguard scale D.
    #[arg(long = "D")]
    pub d: Option<f64>,
    /// Safeguard exponent offset epsilon.
    #[arg(long)]
    pub eps: Option<f64>,
    /// AA damping in (0, 1].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fixed Tikhonov term for the AA least squares (default: 1e-10 * |dG|_F^2).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Relative Tikhonov factor, eta = factor * |dG|_F^2.
    #[arg(long)]
    pub eta_rel: Option<f64>,
    /// Angle-filter threshold.
    #[arg(long = "c-s")]
    pub c_s: Option<f64>,
    /// Length-filter cap.
    #[arg(long)]
    pub kappa_bar: Option<f64>,
    /// Fixed-point residual tolerance.
    #[arg(long)]
    pub toll: Option<f64>,
    /// Relative KKT tolerance.
    #[arg(long)]
    pub kkt_eps: Option<f64>,
    /// Also stop when the KKT residuals are below --kkt-eps.
    #[arg(long)]
    pub kkt_stop: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub max_wall: Option<f64>,
    /// Primal step size (requires --sigma).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Dual step size (requires --tau).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed of the power iteration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// key=value file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "sweep-D", value_delimiter = ',')]
    pub sweep_d: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_eps: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_m: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_kappa: Vec<f64>,
}

/// Reads a `key=value` config file into flag form. Blank lines and lines
/// starting with `#` are ignored.
pub fn config_to_args(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got '{line}'", lineno + 1);
        };
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        match key {
            "config" => bail!("config line {}: nested config files are not supported", lineno + 1),
            "kkt-stop" | "kkt_stop" => match value {
                "true" | "1" | "yes" => out.push(OsString::from("--kkt-stop")),
                "false" | "0" | "no" => {}
                other => bail!("config line {}: kkt-stop expects true/false, got '{other}'", lineno + 1),
            },
            _ => {
                let flag = match key.replace('_', "-").as_str() {
                    "d" | "D" => "D".to_string(),
                    "sweep-d" | "sweep-D" => "sweep-D".to_string(),
                    other => other.to_string(),
                };
                out.push(OsString::from(format!("--{flag}")));
                out.push(OsString::from(value));
            }
        }
    }
    Ok(out)
}

/// Parses the command line, folding in the config file if one is given.
/// Flags on the command line take precedence over the file.
pub fn parse_args<I, T>(argv: I) -> Result<Args>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Args::try_parse_from(&argv)?;
    let Some(path) = &first.config else {
        return Ok(first);
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut merged = Vec::with_capacity(argv.len() + 16);
    merged.push(argv.first().cloned().unwrap_or_else(|| OsString::from("aapdhg")));
    merged.extend(config_to_args(&text)?);
    merged.extend(argv.into_iter().skip(1));
    Ok(Args::try_parse_from(merged)?)
}

/// One combination of swept values.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_bar: Option<f64>,
}

impl SweepPoint {
    /// Directory name, e.g. `D_10__eps_0.1`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.d {
            parts.push(format!("D_{v}"));
        }
        if let Some(v) = self.eps {
            parts.push(format!("eps_{v}"));
        }
        if let Some(v) = self.m {
            parts.push(format!("m_{v}"));
        }
        if let Some(v) = self.kappa_bar {
            parts.push(format!("kappa_{v:e}"));
        }
        parts.join("__")
    }

    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.kappa_bar {
            cfg.filter.kappa_bar = v;
        }
    }
}

fn grid<T: Copy>(values: &[T]) -> Vec<Option<T>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

impl Args {
    pub fn is_sweep(&self) -> bool {
        !(self.sweep_d.is_empty() && self.sweep_eps.is_empty() && self.sweep_m.is_empty() && self.sweep_kappa.is_empty())
    }

    /// Builds the solver configuration, validating flag combinations.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::default();
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.beta {
            cfg.aa.beta = v;
        }
        match (self.eta, self.eta_rel) {
            (Some(_), Some(_)) => bail!("--eta and --eta-rel are mutually exclusive"),
            (Some(v), None) => cfg.aa.eta = Regularization::Fixed(v),
            (None, Some(v)) => cfg.aa.eta = Regularization::Relative(v),
            (None, None) => {}
        }
        if let Some(v) = self.c_s {
            cfg.filter.c_s = v;
        }
        if let Some(v) = self.kappa_bar {
            cfg.filter.kappa_bar = v;
        }
        if let Some(v) = self.toll {
            cfg.toll = v;
        }
        if let Some(v) = self.kkt_eps {
            cfg.kkt_eps = v;
        }
        cfg.kkt_termination = self.kkt_stop;
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.max_wall {
            cfg.max_wall_seconds = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.steps = match (self.tau, self.sigma) {
            (Some(tau), Some(sigma)) => StepRule::Fixed { tau, sigma },
            (None, None) => StepRule::Auto,
            _ => bail!("--tau and --sigma must be given together"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The sweep grid; an error when a swept parameter is also fixed.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let conflicts = [
            (!self.sweep_d.is_empty() && self.d.is_some(), "--D"),
            (!self.sweep_eps.is_empty() && self.eps.is_some(), "--eps"),
            (!self.sweep_m.is_empty() && self.m.is_some(), "--m"),
            (!self.sweep_kappa.is_empty() && self.kappa_bar.is_some(), "--kappa-bar"),
        ];
        for (clash, flag) in conflicts {
            if clash {
                bail!("{flag} conflicts with the corresponding sweep flag");
            }
        }
        let mut points = Vec::new();
        for d in grid(&self.sweep_d) {
            for eps in grid(&self.sweep_eps) {
                for m in grid(&self.sweep_m) {
                    for kappa_bar in grid(&self.sweep_kappa) {
                        points.push(SweepPoint { d, eps, m, kappa_bar });
                    }
                }
            }
        }
        Ok(points)
    }
}

/// Everything written to `summary.json`, in a fixed key order.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub instance: String,
    pub problem: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub method: Method,
    pub status: SolveStatus,
    pub iterations: usize,
    pub i: usize,
    pub j: usize,
    pub aa_failures: usize,
    pub g0_norm: f64,
    pub final_g_norm: f64,
    pub r_gap: f64,
    pub r_primal: f64,
    pub r_dual: f64,
    pub objective: f64,
    pub tau: f64,
    pub sigma: f64,
    pub norm_estimate: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepPoint>,
    pub config: SolverConfig,
}

impl Summary {
    pub fn new(instance: &str, p: &ProblemData, result: &SolveResult, cfg: &SolverConfig) -> Self {
        Self {
            instance: instance.to_string(),
            problem: p.name.clone(),
            rows: p.num_rows(),
            cols: p.num_cols(),
            nnz: p.k().nnz(),
            method: cfg.method,
            status: result.status,
            iterations: result.iterations,
            i: result.aa_steps,
            j: result.pdhg_steps,
            aa_failures: result.aa_failures,
            g0_norm: result.g0_norm,
            final_g_norm: result.final_g_norm,
            r_gap: result.kkt.r_gap,
            r_primal: result.kkt.r_primal,
            r_dual: result.kkt.r_dual,
            objective: result.objective,
            tau: result.steps.tau,
            sigma: result.steps.sigma,
            norm_estimate: result.norm_estimate,
            wall_time_s: result.elapsed_s,
            sweep: None,
            config: cfg.clone(),
        }
    }
}

/// Pretty JSON for a finished run.
pub fn emit_summary(instance: &str, p: &ProblemData, result: &SolveResult, cfg: &SolverConfig) -> String {
    serde_json::to_string_pretty(&Summary::new(instance, p, result, cfg)).expect("summary serializes")
}

fn write_outputs(dir: &Path, summary: &Summary, trajectory: &[TrajectoryRecord]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let csv = dir.join("trajectory.csv");
    let f = File::create(&csv).with_context(|| format!("cannot write {}", csv.display()))?;
    write_csv(trajectory, BufWriter::new(f)).with_context(|| format!("cannot write {}", csv.display()))?;
    let json = dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&json, text).with_context(|| format!("cannot write {}", json.display()))?;
    Ok(())
}

fn exit_code(status: SolveStatus) -> i32 {
    if status.converged() {
        0
    } else {
        2
    }
}

fn load_problem(path: &Path) -> Result<ProblemData> {
    let raw = parse_mps_file(path).with_context(|| format!("cannot load instance {}", path.display()))?;
    to_standard_form(&raw).with_context(|| format!("instance {} is not a valid LP", path.display()))
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("{WORKERS_ENV} must be a positive integer, got 0");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Runs the already-parsed arguments and returns the exit code.
pub fn execute(args: &Args) -> Result<i32> {
    let Some(instance) = &args.instance else {
        bail!("--instance is required");
    };
    let base = args.solver_config()?;
    let points = if args.is_sweep() { args.sweep_points()? } else { Vec::new() };
    let p = load_problem(instance)?;
    let name = instance.display().to_string();
    info!("loaded {} ({} rows, {} columns, {} nonzeros)", p.name, p.num_rows(), p.num_cols(), p.k().nnz());

    if points.is_empty() {
        let (result, trajectory) = solve(&p, &base, None)?;
        let summary = Summary::new(&name, &p, &result, &base);
        write_outputs(&args.out, &summary, &trajectory)?;
        println!(
            "{}: {} after {} iterations (i = {}, j = {}), |g| = {:.3e}, objective = {}",
            p.name, result.status, result.iterations, result.aa_steps, result.pdhg_steps, result.final_g_norm, result.objective
        );
        return Ok(exit_code(result.status));
    }

    let mut configs = Vec::with_capacity(points.len());
    for pt in &points {
        let mut cfg = base.clone();
        pt.apply(&mut cfg);
        cfg.validate().with_context(|| format!("sweep point {}", pt.label()))?;
        configs.push(cfg);
    }
    let pool = worker_pool()?;
    let outcomes: Vec<Result<(SolveStatus, usize, f64)>> = pool.install(|| {
        points
            .par_iter()
            .zip(&configs)
            .map(|(pt, cfg)| {
                let (result, trajectory) = solve(&p, cfg, None)?;
                let mut summary = Summary::new(&name, &p, &result, cfg);
                summary.sweep = Some(pt.clone());
                write_outputs(&args.out.join(pt.label()), &summary, &trajectory)?;
                Ok((result.status, result.iterations, result.final_g_norm))
            })
            .collect()
    });
    let mut code = 0;
    for (pt, outcome) in points.iter().zip(outcomes) {
        let (status, iters, g) = outcome?;
        println!("{}: {status} after {iters} iterations, |g| = {g:.3e}", pt.label());
        code = code.max(exit_code(status));
    }
    Ok(code)
}

/// Entry point used by the binary.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match parse_args(argv) {
        Ok(a) => a,
        Err(e) => {
            if let Some(ce) = e.downcast_ref::<clap::Error>() {
                let _ = ce.print();
                return if ce.use_stderr() { 1 } else { 0 };
            }
            error!("{e:#}");
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            1
        }
    }
}
