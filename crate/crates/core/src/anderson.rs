//! Anderson acceleration in difference form.
//!
//! The memory keeps the last `m` iterate differences `Δu` and residual
//! differences `Δg`, oldest on the left. The accelerated point is
//!
//! ```text
//! u_AA = u − H g,
//! H    = −βD̂ + (ΔU + βD̂ΔG) (ΔGᵀΔG + ηI)⁻¹ ΔGᵀ
//! ```
//!
//! `H` is never formed. The textbook formulation with affine weights
//! (minimize `‖Σ αᵢ gᵢ‖` subject to `Σ αᵢ = 1`) is kept alongside as an
//! independent cross-check.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{cholesky_solve, dot, DenseMatrix, LinalgError};

#[derive(Debug, Error, PartialEq)]
pub enum AaError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid acceleration parameters: {0}")]
    InvalidParams(String),
    #[error("acceleration least-squares system is singular: {0}")]
    Singular(#[source] LinalgError),
    #[error("need at least one residual")]
    Empty,
}

/// Residual differences smaller than this fraction of `‖u‖ + ‖g‖` are
/// indistinguishable from cancellation error and carry no secant information.
const DEGENERATE_REL: f64 = 1e-13;

/// Diagonal scaling `D̂` applied to residuals in the update.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Diagonal {
    Identity,
    Entries(Vec<f64>),
}

impl Diagonal {
    #[inline]
    pub fn entry(&self, i: usize) -> f64 {
        match self {
            Diagonal::Identity => 1.0,
            Diagonal::Entries(d) => d[i],
        }
    }

    /// Spectral norm, i.e. the largest entry magnitude.
    pub fn norm(&self) -> f64 {
        match self {
            Diagonal::Identity => 1.0,
            Diagonal::Entries(d) => d.iter().fold(0.0, |a, &b| a.max(b.abs())),
        }
    }

    fn check(&self, dim: usize) -> Result<(), AaError> {
        if let Diagonal::Entries(d) = self {
            if d.len() != dim {
                return Err(AaError::Dimension {
                    expected: dim,
                    found: d.len(),
                });
            }
            if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(AaError::InvalidParams("D-hat entries must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Tikhonov term `η` added to the normal equations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Regularization {
    /// `η` used as given.
    Fixed(f64),
    /// `η = factor · ‖ΔG‖²_F`.
    Relative(f64),
}

impl Regularization {
    pub fn value(&self, dg_frobenius_sq: f64) -> f64 {
        match *self {
            Regularization::Fixed(eta) => eta,
            Regularization::Relative(f) => f * dg_frobenius_sq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AaParams {
    /// Damping `β ∈ (0, 1]`.
    pub beta: f64,
    pub d_hat: Diagonal,
    pub eta: Regularization,
}

impl Default for AaParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            d_hat: Diagonal::Identity,
            eta: Regularization::Relative(1e-10),
        }
    }
}

impl AaParams {
    pub fn validate(&self) -> Result<(), AaError> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(AaError::InvalidParams(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        let eta = match self.eta {
            Regularization::Fixed(v) | Regularization::Relative(v) => v,
        };
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(AaError::InvalidParams(format!("eta must be >= 0, got {eta}")));
        }
        if let Diagonal::Entries(d) = &self.d_hat {
            if d.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(AaError::InvalidParams("D-hat entries must be positive".into()));
            }
        }
        Ok(())
    }
}

/// FIFO store of `(Δu, Δg)` pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct AaMemory {
    capacity: usize,
    dim: usize,
    du: VecDeque<Vec<f64>>,
    dg: VecDeque<Vec<f64>>,
}

impl AaMemory {
    pub fn new(capacity: usize, dim: usize) -> Self {
        assert!(capacity >= 1, "memory capacity must be at least 1");
        Self {
            capacity,
            dim,
            du: VecDeque::with_capacity(capacity + 1),
            dg: VecDeque::with_capacity(capacity + 1),
        }
    }

    /// Builds a memory from column lists (oldest first). The capacity is
    /// the larger of `capacity` and the number of columns.
    pub fn from_columns(
        capacity: usize,
        dim: usize,
        du: Vec<Vec<f64>>,
        dg: Vec<Vec<f64>>,
    ) -> Result<Self, AaError> {
        if du.len() != dg.len() {
            return Err(AaError::Dimension {
                expected: du.len(),
                found: dg.len(),
            });
        }
        let mut mem = Self::new(capacity.max(du.len()).max(1), dim);
        for (a, b) in du.into_iter().zip(dg) {
            mem.push(a, b)?;
        }
        Ok(mem)
    }

    /// Appends a pair on the right, evicting the oldest pair when full.
    pub fn push(&mut self, du: Vec<f64>, dg: Vec<f64>) -> Result<(), AaError> {
        for v in [&du, &dg] {
            if v.len() != self.dim {
                return Err(AaError::Dimension {
                    expected: self.dim,
                    found: v.len(),
                });
            }
        }
        self.du.push_back(du);
        self.dg.push_back(dg);
        while self.du.len() > self.capacity {
            self.du.pop_front();
            self.dg.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.du.len()
    }

    pub fn is_empty(&self) -> bool {
        self.du.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clear(&mut self) {
        self.du.clear();
        self.dg.clear();
    }

    pub fn du(&self) -> impl ExactSizeIterator<Item = &Vec<f64>> + '_ {
        self.du.iter()
    }

    pub fn dg(&self) -> impl ExactSizeIterator<Item = &Vec<f64>> + '_ {
        self.dg.iter()
    }

    /// Replaces the stored columns (oldest first), keeping the capacity.
    pub fn replace(&mut self, du: Vec<Vec<f64>>, dg: Vec<Vec<f64>>) {
        debug_assert_eq!(du.len(), dg.len());
        debug_assert!(du.len() <= self.capacity);
        self.du = du.into();
        self.dg = dg.into();
    }

    pub fn to_columns(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (self.du.iter().cloned().collect(), self.dg.iter().cloned().collect())
    }
}

/// `u + βD̂g − (ΔU + βD̂ΔG) w`
pub(crate) fn combine<'a>(
    u: &[f64],
    g: &[f64],
    params: &AaParams,
    du: impl Iterator<Item = &'a Vec<f64>>,
    dg: impl Iterator<Item = &'a Vec<f64>>,
    w: &[f64],
) -> Vec<f64> {
    let beta = params.beta;
    let mut out: Vec<f64> = match &params.d_hat {
        Diagonal::Identity => u.iter().zip(g).map(|(ui, gi)| ui + beta * gi).collect(),
        Diagonal::Entries(d) => u
            .iter()
            .zip(g)
            .zip(d)
            .map(|((ui, gi), di)| ui + beta * di * gi)
            .collect(),
    };
    for ((a, b), &wj) in du.zip(dg).zip(w) {
        if wj == 0.0 {
            continue;
        }
        match &params.d_hat {
            Diagonal::Identity => {
                for ((o, ai), bi) in out.iter_mut().zip(a).zip(b) {
                    *o -= wj * (ai + beta * bi);
                }
            }
            Diagonal::Entries(d) => {
                for (((o, ai), bi), di) in out.iter_mut().zip(a).zip(b).zip(d) {
                    *o -= wj * (ai + beta * di * bi);
                }
            }
        }
    }
    out
}

/// The regularized Anderson step `u − H g`.
///
/// Solves the `p×p` system `(ΔGᵀΔG + ηI) w = ΔGᵀg` by Cholesky; an empty
/// memory gives `u + βD̂g`.
///
/// `ΔG` columns that are pure rounding noise get weight zero and are left out
/// of the system, as in a rank-revealing solve. Keeping them would let their
/// weights explode: a relative `η` is set by the informative columns and is
/// far too small to damp a column of size `1e-16`.
pub fn aa_apply(mem: &AaMemory, params: &AaParams, u: &[f64], g: &[f64]) -> Result<Vec<f64>, AaError> {
    let dim = mem.dim();
    for v in [u, g] {
        if v.len() != dim {
            return Err(AaError::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
    }
    params.d_hat.check(dim)?;
    let p = mem.len();
    if p == 0 {
        return Ok(combine(u, g, params, mem.du(), mem.dg(), &[]));
    }
    let scale = crate::linalg::norm2(u) + crate::linalg::norm2(g);
    let cols: Vec<&Vec<f64>> = mem.dg().collect();
    let active: Vec<usize> = (0..p)
        .filter(|&i| crate::linalg::norm2(cols[i]) > DEGENERATE_REL * scale)
        .collect();
    let mut w = vec![0.0; p];
    if !active.is_empty() {
        let q = active.len();
        let mut gram = DenseMatrix::zeros(q, q);
        let mut trace = 0.0;
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate().take(a + 1) {
                let v = dot(cols[i], cols[j]);
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
            trace += gram[(a, a)];
        }
        let eta = params.eta.value(trace);
        for a in 0..q {
            gram[(a, a)] += eta;
        }
        let rhs: Vec<f64> = active.iter().map(|&i| dot(cols[i], g)).collect();
        let sol = cholesky_solve(&gram, &rhs).map_err(AaError::Singular)?;
        for (&i, v) in active.iter().zip(sol) {
            w[i] = v;
        }
    }
    Ok(combine(u, g, params, mem.du(), mem.dg(), &w))
}

/// Affine weights minimizing `‖Σ αᵢ gᵢ‖` subject to `Σ αᵢ = 1`.
///
/// Uses the substitution `α_p = 1 − Σ_{i<p} αᵢ` and solves the resulting
/// unconstrained least-squares problem through an SVD; on a degenerate
/// history the minimum-norm solution of the reduced problem is returned.
pub fn standard_aa_weights(residuals: &[Vec<f64>]) -> Result<Vec<f64>, AaError> {
    let Some(last) = residuals.last() else {
        return Err(AaError::Empty);
    };
    let p = residuals.len() - 1;
    if p == 0 {
        return Ok(vec![1.0]);
    }
    let n = last.len();
    if let Some(bad) = residuals.iter().find(|r| r.len() != n) {
        return Err(AaError::Dimension {
            expected: n,
            found: bad.len(),
        });
    }
    let d = DMatrix::from_fn(n, p, |i, j| residuals[j][i] - last[i]);
    let rhs = -DVector::from_column_slice(last);
    let svd = d.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (n.max(p) as f64) * f64::EPSILON;
    let gamma = svd
        .solve(&rhs, eps)
        .map_err(|e| AaError::InvalidParams(e.to_string()))?;
    let mut alpha: Vec<f64> = gamma.iter().copied().collect();
    let s: f64 = alpha.iter().sum();
    alpha.push(1.0 - s);
    Ok(alpha)
}

/// `(1−β) Σ αᵢ xᵢ + β Σ αᵢ F(xᵢ)`.
pub fn standard_aa_step(
    points: &[Vec<f64>],
    images: &[Vec<f64>],
    weights: &[f64],
    beta: f64,
) -> Result<Vec<f64>, AaError> {
    if points.len() != images.len() || points.len() != weights.len() {
        return Err(AaError::Dimension {
            expected: points.len(),
            found: images.len().min(weights.len()),
        });
    }
    let Some(first) = points.first() else {
        return Err(AaError::Empty);
    };
    let n = first.len();
    let mut out = vec![0.0; n];
    for ((x, fx), &a) in points.iter().zip(images).zip(weights) {
        if x.len() != n || fx.len() != n {
            return Err(AaError::Dimension {
                expected: n,
                found: x.len().min(fx.len()),
            });
        }
        for i in 0..n {
            out[i] += a * ((1.0 - beta) * x[i] + beta * fx[i]);
        }
    }
    Ok(out)
}
