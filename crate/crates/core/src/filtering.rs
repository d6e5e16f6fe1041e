//! Memory filtering for the conditioned Anderson step.
//!
//! Before each accelerated step the difference memory is pruned twice:
//! the angle filter drops columns of `ΔG` that are nearly in the span of
//! the columns to their left, and the length filter truncates the memory so
//! that a computable bound on `‖ΔU‖_F ‖R⁻¹‖_F` stays below `κ̄`. Both
//! filters expect the most recent column on the left, so callers reverse the
//! oldest-first memory around them.

use log::{debug, warn};
use thiserror::Error;

use crate::anderson::{combine, AaParams};
use crate::linalg::{axpy, back_substitute_vec, dot, economy_qr, norm2, DenseMatrix, LinalgError, QrFactors};

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("column count mismatch: {e} columns in E, {f} in F")]
    CountMismatch { e: usize, f: usize },
    #[error("column {index} has length {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("the leading column of F is zero")]
    ZeroLeadingColumn,
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FilterParams {
    /// Minimum sine between a column and the span of the columns before it.
    pub c_s: f64,
    /// Cap on the conditioning bound `‖E‖_F ‖R⁻¹‖_F`.
    pub kappa_bar: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            c_s: 0.2,
            kappa_bar: 1e9,
        }
    }
}

impl FilterParams {
    pub fn new(c_s: f64, kappa_bar: f64) -> Result<Self, FilterError> {
        let p = Self { c_s, kappa_bar };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.c_s > 0.0 && self.c_s <= 1.0) {
            return Err(FilterError::InvalidParams(format!("c_s must lie in (0, 1], got {}", self.c_s)));
        }
        if !(self.kappa_bar > 0.0) {
            return Err(FilterError::InvalidParams(format!(
                "kappa_bar must be positive, got {}",
                self.kappa_bar
            )));
        }
        Ok(())
    }

    /// `c_t = √(1 − c_s²)`
    pub fn c_t(&self) -> f64 {
        c_t(self.c_s)
    }
}

fn c_t(c_s: f64) -> f64 {
    (1.0 - c_s * c_s).max(0.0).sqrt()
}

fn check_pair(e: &[Vec<f64>], f: &[Vec<f64>]) -> Result<(), FilterError> {
    if e.len() != f.len() {
        return Err(FilterError::CountMismatch { e: e.len(), f: f.len() });
    }
    if let Some(first) = f.first() {
        let n = first.len();
        for (index, col) in e.iter().chain(f).enumerate() {
            if col.len() != n {
                return Err(FilterError::Dimension {
                    index: index % f.len(),
                    expected: n,
                    found: col.len(),
                });
            }
        }
    }
    Ok(())
}

/// Matching `(E, F)` column lists.
pub type ColumnPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Reverses the column order of both lists.
pub fn reverse_columns(
    mut e: Vec<Vec<f64>>,
    mut f: Vec<Vec<f64>>,
) -> Result<ColumnPair, FilterError> {
    if e.len() != f.len() {
        return Err(FilterError::CountMismatch { e: e.len(), f: f.len() });
    }
    e.reverse();
    f.reverse();
    Ok((e, f))
}

/// The ratios `σ_i = |r_ii| / ‖f_i‖` from one QR of `F`.
///
/// The QR is a Gram–Schmidt sweep with one reorthogonalization, so `|r_ii|`
/// is the distance from `f_i` to the span of `f_1, …, f_{i−1}` even when an
/// earlier column is dependent (Householder QR without pivoting would shift
/// that mass off the diagonal). Zero columns and columns beyond the ambient
/// dimension get `σ = 0`.
pub fn angle_ratios(f: &[Vec<f64>]) -> Result<Vec<f64>, FilterError> {
    let Some(first) = f.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(f.len().min(n));
    let mut sigma = Vec::with_capacity(f.len());
    for col in f {
        if col.len() != n {
            return Err(FilterError::Dimension {
                index: sigma.len(),
                expected: n,
                found: col.len(),
            });
        }
        let len = norm2(col);
        if len == 0.0 {
            sigma.push(0.0);
            continue;
        }
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        let rn = norm2(&r);
        let ratio = rn / len;
        sigma.push(ratio);
        // below this level the residual is rounding noise
        if ratio > 1e-12 && basis.len() < n {
            r.iter_mut().for_each(|v| *v /= rn);
            basis.push(r);
        }
    }
    Ok(sigma)
}

/// Single-pass angle filter.
///
/// Computes one QR of `F`, marks every column `i ≥ 2` with `σ_i < c_s`,
/// then removes the marked columns from both lists. The first column is
/// always kept.
pub fn angle_filter(
    e: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    c_s: f64,
) -> Result<ColumnPair, FilterError> {
    check_pair(&e, &f)?;
    if f.is_empty() {
        return Ok((e, f));
    }
    if norm2(&f[0]) == 0.0 {
        return Err(FilterError::ZeroLeadingColumn);
    }
    let sigma = angle_ratios(&f)?;
    let keep: Vec<bool> = sigma.iter().enumerate().map(|(i, &s)| i == 0 || s >= c_s).collect();
    let removed = keep.iter().filter(|k| !**k).count();
    if removed > 0 {
        debug!("angle filter removed {removed} of {} columns", f.len());
    }
    let (e, f) = e
        .into_iter()
        .zip(f)
        .zip(&keep)
        .filter_map(|(pair, &k)| k.then_some(pair))
        .unzip();
    Ok((e, f))
}

/// Upper bounds `b_j ≥ ‖(R⁻¹)_{:,j}‖²` for an angle-filtered `F`.
///
/// With `c_t = √(1 − c_s²)`:
///
/// ```text
/// b_1 = 1/‖f_1‖²
/// b_j = 1/c_s² · ( c_t² (c_t+c_s)^{2(j−2)} / (‖f_1‖² c_s^{2(j−2)})
///                + Σ_{i=2}^{j−1} c_t² (c_t+c_s)^{2(j−i−1)} / (‖f_i‖² c_s^{2(j−i)})
///                + 1/‖f_j‖² )            for j ≥ 2
/// ```
pub fn length_bounds(f: &[Vec<f64>], c_s: f64) -> Vec<f64> {
    let p = f.len();
    let inv_sq: Vec<f64> = f
        .iter()
        .map(|col| {
            let s = norm2(col);
            1.0 / (s * s)
        })
        .collect();
    let ct = c_t(c_s);
    let ct2 = ct * ct;
    let cs2 = c_s * c_s;
    let growth = (ct + c_s) * (ct + c_s);
    let mut b = Vec::with_capacity(p);
    for j in 1..=p {
        if j == 1 {
            b.push(inv_sq[0]);
            continue;
        }
        let mut s = ct2 * growth.powi(j as i32 - 2) / cs2.powi(j as i32 - 2) * inv_sq[0];
        for i in 2..j {
            s += ct2 * growth.powi((j - i - 1) as i32) / cs2.powi((j - i) as i32) * inv_sq[i - 1];
        }
        s += inv_sq[j - 1];
        b.push(s / cs2);
    }
    b
}

/// Keeps the longest prefix whose bound `(Σ‖e_j‖²)(Σ b_j)` is at most `κ̄²`.
///
/// Returns empty lists when even the first column violates the cap.
pub fn length_filter(
    mut e: Vec<Vec<f64>>,
    mut f: Vec<Vec<f64>>,
    c_s: f64,
    kappa_bar: f64,
) -> Result<ColumnPair, FilterError> {
    check_pair(&e, &f)?;
    let cap = kappa_bar * kappa_bar;
    let b = length_bounds(&f, c_s);
    let mut e_sum = Vec::with_capacity(e.len());
    let mut b_sum = Vec::with_capacity(e.len());
    let (mut se, mut sb) = (0.0, 0.0);
    for (col, bj) in e.iter().zip(&b) {
        let ne = norm2(col);
        se += ne * ne;
        sb += bj;
        e_sum.push(se);
        b_sum.push(sb);
    }
    let keep = (1..=e.len()).rev().find(|&k| e_sum[k - 1] * b_sum[k - 1] <= cap).unwrap_or(0);
    if keep < e.len() {
        debug!("length filter kept {keep} of {} columns", e.len());
    }
    e.truncate(keep);
    f.truncate(keep);
    Ok((e, f))
}

/// Difference memory after filtering, oldest column first, together with
/// the economy QR of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredMemory {
    e: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    qr: Option<QrFactors>,
}

impl FilteredMemory {
    pub fn empty() -> Self {
        Self {
            e: Vec::new(),
            f: Vec::new(),
            qr: None,
        }
    }

    /// Factors the given memory as is (no filtering).
    pub fn from_columns(e: Vec<Vec<f64>>, f: Vec<Vec<f64>>) -> Result<Self, FilterError> {
        check_pair(&e, &f)?;
        let qr = if f.is_empty() {
            None
        } else {
            let fm = DenseMatrix::from_columns(f[0].len(), &f)?;
            Some(economy_qr(&fm)?)
        };
        Ok(Self { e, f, qr })
    }

    /// Runs reverse → angle filter → length filter → reverse on an
    /// oldest-first memory and factors what remains.
    pub fn filter(e: Vec<Vec<f64>>, f: Vec<Vec<f64>>, params: &FilterParams) -> Result<Self, FilterError> {
        params.validate()?;
        check_pair(&e, &f)?;
        if f.is_empty() {
            return Ok(Self::empty());
        }
        let (e, f) = reverse_columns(e, f)?;
        let (e, f) = angle_filter(e, f, params.c_s)?;
        let (e, f) = length_filter(e, f, params.c_s, params.kappa_bar)?;
        if log::log_enabled!(log::Level::Warn) && f.len() > 1 {
            let ratios = angle_ratios(&f)?;
            for (i, s) in ratios.iter().enumerate().skip(1) {
                if *s < params.c_s - 1e-8 {
                    warn!("kept column {i} has angle ratio {s:.3e} below c_s after re-factoring");
                }
            }
        }
        let (e, f) = reverse_columns(e, f)?;
        Self::from_columns(e, f)
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn e(&self) -> &[Vec<f64>] {
        &self.e
    }

    pub fn f(&self) -> &[Vec<f64>] {
        &self.f
    }

    pub fn qr(&self) -> Option<&QrFactors> {
        self.qr.as_ref()
    }

    pub fn into_columns(self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (self.e, self.f)
    }
}

/// `u − H g` with `H = −βD̂ + (ΔU + βD̂ΔG) R⁻¹Qᵀ`.
pub fn filtered_aa_apply(
    fm: &FilteredMemory,
    params: &AaParams,
    u: &[f64],
    g: &[f64],
) -> Result<Vec<f64>, FilterError> {
    if u.len() != g.len() {
        return Err(FilterError::Dimension {
            index: 0,
            expected: u.len(),
            found: g.len(),
        });
    }
    let w = match &fm.qr {
        None => Vec::new(),
        Some(qr) => {
            if qr.q.nrows() != g.len() {
                return Err(FilterError::Dimension {
                    index: 0,
                    expected: qr.q.nrows(),
                    found: g.len(),
                });
            }
            let qtg = qr.q.transpose_matvec(g)?;
            back_substitute_vec(&qr.r, &qtg)?
        }
    };
    Ok(combine(u, g, params, fm.e.iter(), fm.f.iter(), &w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anderson::{aa_apply, AaMemory, Diagonal, Regularization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cols(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
        (0..p).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn reverse_examples() {
        let f = vec![vec![1.0], vec![2.0], vec![3.0]];
        let (e2, f2) = reverse_columns(f.clone(), f.clone()).unwrap();
        assert_eq!(f2, vec![vec![3.0], vec![2.0], vec![1.0]]);
        let (_, f3) = reverse_columns(e2, f2).unwrap();
        assert_eq!(f3, f);
        let (_, single) = reverse_columns(vec![vec![1.0]], vec![vec![5.0]]).unwrap();
        assert_eq!(single, vec![vec![5.0]]);
        assert!(reverse_columns(vec![], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn angle_filter_keeps_orthonormal_columns() {
        let f = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let (_, out) = angle_filter(f.clone(), f.clone(), 0.2).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn angle_filter_drops_duplicates() {
        let f = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let e = vec![vec![7.0, 7.0], vec![8.0, 8.0]];
        let (e2, f2) = angle_filter(e, f, 0.2).unwrap();
        assert_eq!(f2, vec![vec![1.0, 2.0]]);
        assert_eq!(e2, vec![vec![7.0, 7.0]]);
    }

    #[test]
    fn angle_filter_threshold_by_sine() {
        for (s, kept) in [(0.1, 1usize), (0.3, 2)] {
            let c: f64 = (1.0f64 - s * s).sqrt();
            let f = vec![vec![1.0, 0.0], vec![c, s]];
            let (_, out) = angle_filter(f.clone(), f, 0.2).unwrap();
            assert_eq!(out.len(), kept, "sin = {s}");
        }
    }

    #[test]
    fn angle_filter_zero_columns() {
        let f = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(angle_filter(f.clone(), f, 0.2), Err(FilterError::ZeroLeadingColumn));
        let f = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let (_, out) = angle_filter(f.clone(), f, 0.2).unwrap();
        assert_eq!(out, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn angle_filter_more_columns_than_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = rand_cols(&mut rng, 2, 5);
        let (_, out) = angle_filter(f.clone(), f, 0.2).unwrap();
        assert!(out.len() <= 2);
    }

    #[test]
    fn length_bounds_examples() {
        assert_eq!(length_bounds(&[vec![2.0, 0.0]], 0.2), vec![0.25]);
        let b = length_bounds(&[vec![1.0, 0.0], vec![0.0, 1.0]], 0.2);
        assert!((b[1] - 49.0).abs() < 1e-12, "{}", b[1]);
    }

    #[test]
    fn length_bounds_dominate_inverse_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let n = rng.random_range(3..30);
            let p = rng.random_range(1..=n.min(10));
            let f = rand_cols(&mut rng, n, p);
            let (_, f) = angle_filter(f.clone(), f, 0.2).unwrap();
            let b = length_bounds(&f, 0.2);
            let qr = economy_qr(&DenseMatrix::from_columns(n, &f).unwrap()).unwrap();
            let rinv = crate::linalg::back_substitute(&qr.r, &DenseMatrix::identity(f.len())).unwrap();
            for j in 0..f.len() {
                let c = norm2(rinv.col(j));
                assert!(c * c <= b[j] * (1.0 + 1e-10), "trial {trial} column {j}: {} > {}", c * c, b[j]);
            }
        }
    }

    #[test]
    fn length_filter_examples() {
        let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let (e, _) = length_filter(eye.clone(), eye.clone(), 0.2, 1e8).unwrap();
        assert_eq!(e.len(), 3);

        let (e, _) = length_filter(vec![vec![1.0]], vec![vec![1.0]], 0.2, 1.0).unwrap();
        assert_eq!(e.len(), 1);

        let big: Vec<Vec<f64>> = eye.iter().map(|c| c.iter().map(|v| v * 1e6).collect()).collect();
        let (e, f) = length_filter(big, eye, 0.2, 10.0).unwrap();
        assert!(e.is_empty() && f.is_empty());
    }

    #[test]
    fn empty_filtered_memory_is_fixed_point_step() {
        let fm = FilteredMemory::empty();
        let out = filtered_aa_apply(&fm, &AaParams::default(), &[1.0, 2.0], &[0.5, 0.5]).unwrap();
        assert_eq!(out, vec![1.5, 2.5]);
    }

    #[test]
    fn qr_path_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = AaParams {
            beta: 0.7,
            d_hat: Diagonal::Identity,
            eta: Regularization::Fixed(0.0),
        };
        for _ in 0..20 {
            let n = 12;
            let p = rng.random_range(1..6);
            let e = rand_cols(&mut rng, n, p);
            let f = rand_cols(&mut rng, n, p);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fm = FilteredMemory::from_columns(e.clone(), f.clone()).unwrap();
            let a = filtered_aa_apply(&fm, &params, &u, &g).unwrap();
            let mem = AaMemory::from_columns(p, n, e, f).unwrap();
            let b = aa_apply(&mem, &params, &u, &g).unwrap();
            let diff = norm2(&crate::linalg::sub(&a, &b));
            assert!(diff <= 1e-8 * norm2(&b).max(1.0));
        }
    }

    #[test]
    fn filter_pipeline_keeps_newest_column_and_order() {
        // oldest-first: the newest column duplicates the oldest, so the
        // oldest must go (newest is always kept).
        let f = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]];
        let e = vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![3.0, 3.0, 3.0]];
        let fm = FilteredMemory::filter(e, f, &FilterParams::default()).unwrap();
        assert_eq!(fm.e(), &[vec![2.0, 2.0, 2.0], vec![3.0, 3.0, 3.0]]);
        assert_eq!(fm.f(), &[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]);
    }

    #[test]
    fn params_validation() {
        assert!(FilterParams::new(0.2, 1e9).is_ok());
        assert!(FilterParams::new(0.0, 1e9).is_err());
        assert!(FilterParams::new(1.2, 1e9).is_err());
        assert!(FilterParams::new(0.2, 0.0).is_err());
        assert!((FilterParams::default().c_t() - 0.96f64.sqrt()).abs() < 1e-15);
    }
}
