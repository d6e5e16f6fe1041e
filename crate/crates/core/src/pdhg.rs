//! The PDHG fixed-point map for the four-block LP and its helpers.
//!
//! With `X = {l ≤ x ≤ u}` and `Y = ℝ₊^{m1} × ℝ^{m2}` one step reads
//!
//! ```text
//! x⁺ = P_X(x − τ(c − Kᵀy))
//! y⁺ = P_Y(y + σ(q − K(2x⁺ − x)))
//! ```
//!
//! and `T(x, y) = (x⁺, y⁺)`.

use thiserror::Error;

use crate::linalg::{dot, norm2, LinalgError};
use crate::lp_model::{LambdaSpec, LambdaTag, ProblemData};

#[derive(Debug, Error, PartialEq)]
pub enum PdhgError {
    #[error("step sizes must be positive and finite (tau = {tau}, sigma = {sigma})")]
    InvalidStepSizes { tau: f64, sigma: f64 },
    #[error("step sizes violate tau*sigma*|K|^2 < 1 (product {product})")]
    StepSizesTooLarge { product: f64 },
    #[error("M-inner product is only supported for tau == sigma (tau = {tau}, sigma = {sigma})")]
    AsymmetricMetric { tau: f64, sigma: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A primal-dual point stored as one contiguous vector `[x; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    data: Vec<f64>,
    n: usize,
}

impl Iterate {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut data = x;
        data.extend(y);
        Self { data, n }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            data: vec![0.0; n + m],
            n,
        }
    }

    /// Wraps an already concatenated vector with primal length `n`.
    pub fn from_concat(data: Vec<f64>, n: usize) -> Self {
        assert!(n <= data.len());
        Self { data, n }
    }

    pub fn x(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn y(&self) -> &[f64] {
        &self.data[self.n..]
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.data[..self.n]
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.data[self.n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn primal_len(&self) -> usize {
        self.n
    }

    pub fn dual_len(&self) -> usize {
        self.data.len() - self.n
    }

    /// True if `x ∈ X` and `y ∈ Y` exactly.
    pub fn is_feasible(&self, p: &ProblemData) -> bool {
        self.x()
            .iter()
            .zip(p.lower().iter().zip(p.upper()))
            .all(|(&x, (&l, &u))| l <= x && x <= u)
            && self.y()[..p.num_ineq()].iter().all(|&y| y >= 0.0)
    }
}

/// Primal and dual step sizes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StepSizes {
    pub tau: f64,
    pub sigma: f64,
}

impl StepSizes {
    pub fn new(tau: f64, sigma: f64) -> Result<Self, PdhgError> {
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return Err(PdhgError::InvalidStepSizes { tau, sigma });
        }
        Ok(Self { tau, sigma })
    }

    /// Like [`StepSizes::new`], additionally checking `τσ‖K‖² < 1` against
    /// a norm estimate.
    pub fn checked(tau: f64, sigma: f64, norm_estimate: f64) -> Result<Self, PdhgError> {
        let s = Self::new(tau, sigma)?;
        let product = tau * sigma * norm_estimate * norm_estimate;
        if product >= 1.0 {
            return Err(PdhgError::StepSizesTooLarge { product });
        }
        Ok(s)
    }
}

/// Componentwise clamp onto `[l, u]`. Infinite bounds are skipped.
pub fn project_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &l), &u) in x.iter_mut().zip(lower).zip(upper) {
        if l.is_finite() && *xi < l {
            *xi = l;
        }
        if u.is_finite() && *xi > u {
            *xi = u;
        }
    }
}

/// Clamps the first `m1` entries at zero from below.
pub fn project_dual(y: &mut [f64], m1: usize) {
    for yi in &mut y[..m1] {
        if *yi < 0.0 {
            *yi = 0.0;
        }
    }
}

/// Projection onto `X × Y`.
pub fn project_feasible(u: &mut Iterate, p: &ProblemData) {
    let n = u.primal_len();
    let (x, y) = u.as_mut_slice().split_at_mut(n);
    project_box(x, p.lower(), p.upper());
    project_dual(y, p.num_ineq());
}

/// Projection onto `Λ`.
pub fn project_lambda(v: &mut [f64], spec: &LambdaSpec) {
    for (vi, tag) in v.iter_mut().zip(&spec.tags) {
        match tag {
            LambdaTag::Zero => *vi = 0.0,
            LambdaTag::NonPos => *vi = vi.min(0.0),
            LambdaTag::NonNeg => *vi = vi.max(0.0),
            LambdaTag::Free => {}
        }
    }
}

/// Reusable evaluator of `T` that keeps its scratch buffers between calls.
///
/// After [`PdhgOperator::apply`], [`PdhgOperator::last_kt_y`] holds `Kᵀy`
/// for the input `y`, which the KKT diagnostics reuse.
#[derive(Debug, Clone)]
pub struct PdhgOperator<'a> {
    problem: &'a ProblemData,
    steps: StepSizes,
    kt_y: Vec<f64>,
    extrap: Vec<f64>,
    k_extrap: Vec<f64>,
}

impl<'a> PdhgOperator<'a> {
    pub fn new(problem: &'a ProblemData, steps: StepSizes) -> Self {
        Self {
            problem,
            steps,
            kt_y: vec![0.0; problem.num_cols()],
            extrap: vec![0.0; problem.num_cols()],
            k_extrap: vec![0.0; problem.num_rows()],
        }
    }

    pub fn steps(&self) -> StepSizes {
        self.steps
    }

    pub fn problem(&self) -> &'a ProblemData {
        self.problem
    }

    /// Writes `T(u)` into `out`.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) -> Result<(), PdhgError> {
        let p = self.problem;
        let n = p.num_cols();
        let m = p.num_rows();
        if u.len() != n + m {
            return Err(LinalgError::DimensionMismatch {
                expected: n + m,
                found: u.len(),
            }
            .into());
        }
        if out.len() != n + m {
            return Err(LinalgError::DimensionMismatch {
                expected: n + m,
                found: out.len(),
            }
            .into());
        }
        let StepSizes { tau, sigma } = self.steps;
        let (x, y) = u.split_at(n);
        let (x_new, y_new) = out.split_at_mut(n);

        p.k().matvec_transpose_into(y, &mut self.kt_y)?;
        for j in 0..n {
            x_new[j] = x[j] - tau * (p.c()[j] - self.kt_y[j]);
        }
        project_box(x_new, p.lower(), p.upper());

        for j in 0..n {
            self.extrap[j] = 2.0 * x_new[j] - x[j];
        }
        p.k().matvec_into(&self.extrap, &mut self.k_extrap)?;
        let q = p.q();
        for i in 0..m {
            y_new[i] = y[i] + sigma * (q[i] - self.k_extrap[i]);
        }
        project_dual(y_new, p.num_ineq());
        Ok(())
    }

    /// `Kᵀy` for the `y` of the most recent [`PdhgOperator::apply`] input.
    pub fn last_kt_y(&self) -> &[f64] {
        &self.kt_y
    }
}

/// One PDHG step `T(u)`.
pub fn pdhg_step(u: &Iterate, p: &ProblemData, s: StepSizes) -> Result<Iterate, PdhgError> {
    let mut out = vec![0.0; u.as_slice().len()];
    PdhgOperator::new(p, s).apply(u.as_slice(), &mut out)?;
    Ok(Iterate::from_concat(out, u.primal_len()))
}

/// `g = T(u) − u` and `‖g‖`.
pub fn fixed_point_residual(u: &Iterate, tu: &Iterate) -> (Vec<f64>, f64) {
    let g: Vec<f64> = tu
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let norm = norm2(&g);
    (g, norm)
}

/// `⟨M u, v⟩` with `M = [[I, τKᵀ], [σK, I]]`, evaluated matrix-free.
///
/// Only defined for `τ = σ`, where `M` is symmetric.
pub fn m_inner_product(
    u: &[f64],
    v: &[f64],
    p: &ProblemData,
    s: StepSizes,
) -> Result<f64, PdhgError> {
    if s.tau != s.sigma {
        return Err(PdhgError::AsymmetricMetric {
            tau: s.tau,
            sigma: s.sigma,
        });
    }
    let n = p.num_cols();
    let m = p.num_rows();
    for w in [u, v] {
        if w.len() != n + m {
            return Err(LinalgError::DimensionMismatch {
                expected: n + m,
                found: w.len(),
            }
            .into());
        }
    }
    let (ux, uy) = u.split_at(n);
    let (vx, vy) = v.split_at(n);
    let kt_uy = p.k().matvec_transpose(uy)?;
    let k_ux = p.k().matvec(ux)?;
    Ok(dot(ux, vx) + dot(uy, vy) + s.tau * dot(&kt_uy, vx) + s.sigma * dot(&k_ux, vy))
}

/// `‖w‖²_M`.
pub fn m_norm_squared(w: &[f64], p: &ProblemData, s: StepSizes) -> Result<f64, PdhgError> {
    m_inner_product(w, w, p, s)
}
