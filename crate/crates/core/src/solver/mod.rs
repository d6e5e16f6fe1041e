//! The outer loops: plain PDHG, safeguarded AA-PDHG and filtered AA-PDHG.
//!
//! Every iteration evaluates `û = T(u)` and `g = û − u`. An accelerated
//! method tries the Anderson candidate only while
//! `‖g‖ ≤ D‖g⁰‖(i+1)^{−(1+ε)}`, where `i` counts accepted AA steps; the
//! candidate is projected back onto `X × Y`. Otherwise `û` is taken.

pub mod kkt;
pub mod trajectory;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::anderson::{aa_apply, AaError, AaMemory, AaParams, Diagonal};
use crate::filtering::{filtered_aa_apply, FilterError, FilterParams, FilteredMemory};
use crate::linalg::{power_iteration_norm, sub};
use crate::lp_model::ProblemData;
use crate::pdhg::{project_feasible, Iterate, PdhgError, PdhgOperator, StepSizes};

pub use kkt::{kkt_metrics, kkt_metrics_with, KktMetrics};
pub use trajectory::{write_csv, StepType, TrajectoryRecord, CSV_HEADER};

/// Multiplier applied to `1/‖K‖` for the automatic step sizes.
pub const STEP_SAFETY: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("starting point has {found} entries, expected {expected}")]
    StartDimension { expected: usize, found: usize },
    #[error(transparent)]
    Pdhg(#[from] PdhgError),
    #[error(transparent)]
    Aa(#[from] AaError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pdhg,
    AaPdhg,
    FaaPdhg,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pdhg => "pdhg",
            Method::AaPdhg => "aa-pdhg",
            Method::FaaPdhg => "faa-pdhg",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pdhg" => Ok(Method::Pdhg),
            "aa-pdhg" | "aa" => Ok(Method::AaPdhg),
            "faa-pdhg" | "faa" => Ok(Method::FaaPdhg),
            other => Err(format!("unknown method '{other}' (expected pdhg, aa-pdhg or faa-pdhg)")),
        }
    }
}

/// How `τ` and `σ` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `τ = σ = 0.9/σ̂` with `σ̂` a power-iteration estimate of `‖K‖`.
    Auto,
    Fixed { tau: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Memory capacity `m`.
    pub m: usize,
    /// Safeguard scale `D`.
    pub d: f64,
    /// Safeguard exponent offset `ε`.
    pub eps: f64,
    pub aa: AaParams,
    pub filter: FilterParams,
    /// Fixed-point residual tolerance.
    pub toll: f64,
    pub kkt_eps: f64,
    /// Also stop once all three relative KKT residuals are below `kkt_eps`.
    pub kkt_termination: bool,
    pub max_iters: usize,
    pub max_wall_seconds: f64,
    pub steps: StepRule,
    pub power_iters: usize,
    pub power_rel_tol: f64,
    pub seed: u64,
    /// Keep every iterate `u^k` in the result (memory heavy; for diagnostics).
    #[serde(skip)]
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::FaaPdhg,
            m: 5,
            d: 1.0,
            eps: 1.0,
            aa: AaParams::default(),
            filter: FilterParams::default(),
            toll: 1e-4,
            kkt_eps: 1e-4,
            kkt_termination: false,
            max_iters: 100_000,
            max_wall_seconds: 3600.0,
            steps: StepRule::Auto,
            power_iters: 5000,
            power_rel_tol: 1e-4,
            seed: 0,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: String| Err(SolveError::Config(msg));
        if self.m < 1 {
            return bad("memory size m must be at least 1".into());
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return bad(format!("D must be positive, got {}", self.d));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.toll > 0.0) {
            return bad(format!("toll must be positive, got {}", self.toll));
        }
        if !(self.kkt_eps > 0.0) {
            return bad(format!("kkt_eps must be positive, got {}", self.kkt_eps));
        }
        if !(self.max_wall_seconds > 0.0) {
            return bad(format!("max wall time must be positive, got {}", self.max_wall_seconds));
        }
        self.aa.validate()?;
        self.filter.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    ResidualTol,
    KktTol,
    MaxIters,
    Timeout,
    FixedPointStart,
}

impl SolveStatus {
    /// Whether the run reached one of its tolerances.
    pub fn converged(&self) -> bool {
        matches!(self, SolveStatus::ResidualTol | SolveStatus::KktTol | SolveStatus::FixedPointStart)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::ResidualTol => "RESIDUAL_TOL",
            SolveStatus::KktTol => "KKT_TOL",
            SolveStatus::MaxIters => "MAX_ITERS",
            SolveStatus::Timeout => "TIMEOUT",
            SolveStatus::FixedPointStart => "FIXED_POINT_START",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Number of steps taken; the trajectory has one more row.
    pub iterations: usize,
    pub aa_steps: usize,
    pub pdhg_steps: usize,
    /// Safeguard passes whose AA candidate could not be computed.
    pub aa_failures: usize,
    pub g0_norm: f64,
    pub final_g_norm: f64,
    pub kkt: KktMetrics,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Objective in the original sense, including any constant.
    pub objective: f64,
    pub steps: StepSizes,
    pub norm_estimate: Option<f64>,
    pub elapsed_s: f64,
    /// `u^0, …, u^K` when requested in the config.
    pub iterates: Vec<Vec<f64>>,
}

/// `‖g‖ ≤ D‖g⁰‖(i+1)^{−(1+ε)}`
pub fn safeguard_pass(g_norm: f64, g0_norm: f64, i: usize, d: f64, eps: f64) -> bool {
    g_norm <= safeguard_threshold(g0_norm, i, d, eps)
}

pub fn safeguard_threshold(g0_norm: f64, i: usize, d: f64, eps: f64) -> f64 {
    d * g0_norm * ((i + 1) as f64).powf(-(1.0 + eps))
}

/// Step sizes per the configured rule, with the `‖K‖` estimate if one was
/// computed.
pub fn select_step_sizes(p: &ProblemData, cfg: &SolverConfig) -> Result<(StepSizes, Option<f64>), SolveError> {
    match cfg.steps {
        StepRule::Fixed { tau, sigma } => {
            let s = StepSizes::new(tau, sigma)?;
            if p.k().nnz() > 0 {
                let est = power_iteration_norm(p.k(), cfg.power_iters, cfg.power_rel_tol, cfg.seed);
                let product = tau * sigma * est * est;
                if product >= 1.0 {
                    warn!("fixed step sizes give tau*sigma*|K|^2 ~ {product:.4} >= 1; convergence is not guaranteed");
                }
                Ok((s, Some(est)))
            } else {
                Ok((s, None))
            }
        }
        StepRule::Auto => {
            let est = power_iteration_norm(p.k(), cfg.power_iters, cfg.power_rel_tol, cfg.seed);
            if est == 0.0 {
                return Ok((StepSizes::new(1.0, 1.0)?, Some(0.0)));
            }
            let t = STEP_SAFETY / est;
            Ok((StepSizes::checked(t, t, est)?, Some(est)))
        }
    }
}

enum Memory {
    None,
    Plain(AaMemory),
    Filtered {
        e: Vec<Vec<f64>>,
        f: Vec<Vec<f64>>,
    },
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Runs the configured method from `u0` (default `P(0)`).
pub fn solve(
    p: &ProblemData,
    cfg: &SolverConfig,
    u0: Option<Iterate>,
) -> Result<(SolveResult, Vec<TrajectoryRecord>), SolveError> {
    cfg.validate()?;
    let n = p.num_cols();
    let dim = n + p.num_rows();
    if let Diagonal::Entries(d) = &cfg.aa.d_hat {
        if d.len() != dim {
            return Err(SolveError::Config(format!(
                "D-hat has {} entries, expected {dim}",
                d.len()
            )));
        }
    }
    let mut u = match u0 {
        Some(it) => {
            if it.as_slice().len() != dim || it.primal_len() != n {
                return Err(SolveError::StartDimension {
                    expected: dim,
                    found: it.as_slice().len(),
                });
            }
            it
        }
        None => Iterate::zeros(n, p.num_rows()),
    };
    project_feasible(&mut u, p);

    let start = Instant::now();
    let (steps, norm_estimate) = select_step_sizes(p, cfg)?;
    info!(
        "{} on {}x{} (nnz {}), tau = {:.6e}, sigma = {:.6e}",
        cfg.method,
        p.num_rows(),
        n,
        p.k().nnz(),
        steps.tau,
        steps.sigma
    );
    let spec = p.lambda_spec();
    let mut op = PdhgOperator::new(p, steps);

    let mut memory = match cfg.method {
        Method::Pdhg => Memory::None,
        Method::AaPdhg => Memory::Plain(AaMemory::new(cfg.m, dim)),
        Method::FaaPdhg => Memory::Filtered {
            e: Vec::new(),
            f: Vec::new(),
        },
    };

    let mut trajectory = Vec::new();
    let mut iterates = Vec::new();
    let mut tu = vec![0.0; dim];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let (mut i, mut j, mut aa_failures) = (0usize, 0usize, 0usize);
    let mut g0_norm = 0.0;
    let mut k = 0usize;

    let (status, g_norm, kkt, lambda) = loop {
        op.apply(u.as_slice(), &mut tu)?;
        let g = sub(&tu, u.as_slice());
        let g_norm = crate::linalg::norm2(&g);
        if k == 0 {
            g0_norm = g_norm;
        }
        let (kkt, lambda) = kkt_metrics_with(u.x(), u.y(), op.last_kt_y(), p, &spec).map_err(PdhgError::from)?;
        if cfg.record_iterates {
            iterates.push(u.as_slice().to_vec());
        }
        let mut record = TrajectoryRecord {
            k,
            g_norm,
            step_type: StepType::Stop,
            i,
            j,
            r_gap: kkt.r_gap,
            r_primal: kkt.r_primal,
            r_dual: kkt.r_dual,
            objective: p.reported_objective(u.x()),
            elapsed_s: start.elapsed().as_secs_f64(),
        };

        let stop = if g_norm == 0.0 && k == 0 {
            Some(SolveStatus::FixedPointStart)
        } else if g_norm < cfg.toll {
            Some(SolveStatus::ResidualTol)
        } else if cfg.kkt_termination && kkt.within(cfg.kkt_eps) {
            Some(SolveStatus::KktTol)
        } else if k >= cfg.max_iters {
            Some(SolveStatus::MaxIters)
        } else if record.elapsed_s >= cfg.max_wall_seconds {
            Some(SolveStatus::Timeout)
        } else {
            None
        };
        if let Some(status) = stop {
            trajectory.push(record);
            break (status, g_norm, kkt, lambda);
        }

        if let Some((pu, pg)) = prev.take() {
            let du = sub(u.as_slice(), &pu);
            let dg = sub(&g, &pg);
            match &mut memory {
                Memory::None => {}
                Memory::Plain(mem) => mem.push(du, dg)?,
                Memory::Filtered { e, f } => {
                    e.push(du);
                    f.push(dg);
                    if e.len() > cfg.m {
                        e.remove(0);
                        f.remove(0);
                    }
                }
            }
        }

        // u¹ = T(u⁰) is always a plain step; acceleration starts once the
        // memory holds a difference pair.
        let try_aa = k > 0 && !matches!(memory, Memory::None) && safeguard_pass(g_norm, g0_norm, i, cfg.d, cfg.eps);
        let candidate = if try_aa {
            let c = match &mut memory {
                Memory::None => unreachable!(),
                Memory::Plain(mem) => aa_apply(mem, &cfg.aa, u.as_slice(), &g).map_err(SolveError::from),
                Memory::Filtered { e, f } => {
                    FilteredMemory::filter(std::mem::take(e), std::mem::take(f), &cfg.filter)
                        .map_err(SolveError::from)
                        .and_then(|fm| {
                            let out = filtered_aa_apply(&fm, &cfg.aa, u.as_slice(), &g);
                            let (fe, ff) = fm.into_columns();
                            *e = fe;
                            *f = ff;
                            out.map_err(SolveError::from)
                        })
                }
            };
            match c {
                Ok(v) if finite(&v) => Some(v),
                Ok(_) => {
                    debug!("iteration {k}: AA candidate is not finite, taking the PDHG step");
                    aa_failures += 1;
                    None
                }
                Err(err) => {
                    debug!("iteration {k}: AA step failed ({err}), taking the PDHG step");
                    aa_failures += 1;
                    None
                }
            }
        } else {
            None
        };

        let next = match candidate {
            Some(v) => {
                let mut it = Iterate::from_concat(v, n);
                project_feasible(&mut it, p);
                record.step_type = StepType::Aa;
                i += 1;
                it
            }
            None => {
                record.step_type = StepType::Pdhg;
                j += 1;
                Iterate::from_concat(tu.clone(), n)
            }
        };
        trajectory.push(record);
        prev = Some((u.into_vec(), g));
        u = next;
        k += 1;
    };

    let elapsed_s = start.elapsed().as_secs_f64();
    info!(
        "{status} after {k} iterations ({i} AA, {j} PDHG), |g| = {g_norm:.3e}, kkt max = {:.3e}, {elapsed_s:.2}s",
        kkt.max()
    );
    let objective = p.reported_objective(u.x());
    let result = SolveResult {
        status,
        iterations: k,
        aa_steps: i,
        pdhg_steps: j,
        aa_failures,
        g0_norm,
        final_g_norm: g_norm,
        kkt,
        x: u.x().to_vec(),
        y: u.y().to_vec(),
        lambda,
        objective,
        steps,
        norm_estimate,
        elapsed_s,
        iterates,
    };
    Ok((result, trajectory))
}
