//! Compressed sparse row storage and the matrix-free kernels built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{norm2, LinalgError};

/// A sparse matrix in compressed row storage.
///
/// Column indices are strictly increasing within each row. Explicit zeros
/// are allowed but never created by [`SparseMatrix::from_triplets`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::IndexOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_indices.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_indices.push(c);
            values.push(v);
        }
        // drop cancelled duplicates
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_indices).zip(values) {
            if v != 0.0 {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_offsets[r + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices: keep_cols,
            values: keep_vals,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from a row-major dense array, skipping zeros.
    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Result<Self, LinalgError> {
        let mut triplets = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::DimensionMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, &triplets)
    }

    /// Stacks `top` over `bottom`. Both must have the same column count.
    pub fn vstack(top: &Self, bottom: &Self) -> Result<Self, LinalgError> {
        if top.ncols != bottom.ncols {
            return Err(LinalgError::DimensionMismatch {
                expected: top.ncols,
                found: bottom.ncols,
            });
        }
        let nnz_top = top.nnz();
        let mut row_offsets = top.row_offsets.clone();
        row_offsets.extend(bottom.row_offsets[1..].iter().map(|&o| o + nnz_top));
        let mut col_indices = top.col_indices.clone();
        col_indices.extend_from_slice(&bottom.col_indices);
        let mut values = top.values.clone();
        values.extend_from_slice(&bottom.values);
        Ok(Self {
            nrows: top.nrows + bottom.nrows,
            ncols: top.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Returns the sub-matrix made of rows `start..end`.
    pub fn row_slice(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.nrows);
        let lo = self.row_offsets[start];
        let hi = self.row_offsets[end];
        Self {
            nrows: end - start,
            ncols: self.ncols,
            row_offsets: self.row_offsets[start..=end].iter().map(|&o| o - lo).collect(),
            col_indices: self.col_indices[lo..hi].to_vec(),
            values: self.values[lo..hi].to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over the stored `(col, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterates over all stored `(row, col, value)` entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] += v;
        }
        out
    }

    /// `M v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut out = vec![0.0; self.nrows];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    /// `M v` written into `out`.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) -> Result<(), LinalgError> {
        check_len(self.ncols, v.len())?;
        check_len(self.nrows, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            let mut acc = 0.0;
            for (&j, &a) in self.col_indices[lo..hi].iter().zip(&self.values[lo..hi]) {
                acc += a * v[j];
            }
            *o = acc;
        }
        Ok(())
    }

    /// `Mᵀ v`, without forming the transpose.
    pub fn matvec_transpose(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut out = vec![0.0; self.ncols];
        self.matvec_transpose_into(v, &mut out)?;
        Ok(out)
    }

    /// `Mᵀ v` written into `out`.
    pub fn matvec_transpose_into(&self, v: &[f64], out: &mut [f64]) -> Result<(), LinalgError> {
        check_len(self.nrows, v.len())?;
        check_len(self.ncols, out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            for (&j, &a) in self.col_indices[lo..hi].iter().zip(&self.values[lo..hi]) {
                out[j] += a * vi;
            }
        }
        Ok(())
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), LinalgError> {
    if expected != found {
        Err(LinalgError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Estimates the spectral norm `‖M‖₂` by power iteration on `MᵀM`.
///
/// The start vector is drawn uniformly from `[-1, 1]^n` with a ChaCha
/// generator seeded by `seed`, so the result is reproducible. Each sweep
/// reports `σ = ‖M v‖` for the current unit vector `v`, which never exceeds
/// the true norm. The estimates increase geometrically towards `‖M‖₂`, so
/// the remaining error is extrapolated from the ratio `ρ` of successive
/// increments as `δ ρ / (1 − ρ)`; iteration stops once that projected error
/// is below `rel_tol` relatively, or after `max_iters` sweeps. An all-zero
/// matrix yields `0`.
pub fn power_iteration_norm(m: &SparseMatrix, max_iters: usize, rel_tol: f64, seed: u64) -> f64 {
    if m.nnz() == 0 || m.ncols() == 0 || m.values.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m.ncols()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let nv = norm2(&v);
    if nv == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= nv);
    }

    let mut mv = vec![0.0; m.nrows()];
    let mut w = vec![0.0; m.ncols()];
    let mut estimate = 0.0;
    let mut prev_delta = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        m.matvec_into(&v, &mut mv).expect("sizes fixed above");
        let sigma = norm2(&mv);
        m.matvec_transpose_into(&mv, &mut w).expect("sizes fixed above");
        let nw = norm2(&w);
        let delta = (sigma - estimate).abs();
        let rho = delta / prev_delta;
        let remaining = if rho < 1.0 { delta * rho / (1.0 - rho) } else { f64::INFINITY };
        let converged = delta <= rel_tol * sigma && remaining <= rel_tol * sigma;
        prev_delta = delta;
        estimate = sigma;
        if converged || nw == 0.0 {
            break;
        }
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
    }
    estimate
}
