//! Small dense kernels for the acceleration memory: economy QR, triangular
//! solves and a Cholesky solve for the regularized normal equations.
//!
//! Memory matrices are tall and skinny (`n` rows, at most a few dozen
//! columns), so everything is stored column-major.

use super::{dot, norm2, LinalgError};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(nrows: usize, columns: &[C]) -> Result<Self, LinalgError> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            let c = c.as_ref();
            if c.len() != nrows {
                return Err(LinalgError::DimensionMismatch {
                    expected: nrows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            nrows,
            ncols: columns.len(),
            data,
        })
    }

    /// Builds a matrix from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols, "ragged rows");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.ncols != other.nrows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let mut out = Self::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            for k in 0..self.ncols {
                let b = other[(k, j)];
                if b == 0.0 {
                    continue;
                }
                let a = self.col(k);
                out.col_mut(j).iter_mut().zip(a).for_each(|(o, &x)| *o += x * b);
            }
        }
        Ok(out)
    }

    /// `Aᵀ v`.
    pub fn transpose_matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if v.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.nrows,
                found: v.len(),
            });
        }
        Ok((0..self.ncols).map(|j| dot(self.col(j), v)).collect())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

/// Economy QR factors: `Q` is `n×p` with orthonormal columns and `R` is
/// `p×p` upper triangular with a nonnegative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder economy QR of an `n×p` matrix with `1 ≤ p ≤ n`.
///
/// Column signs are normalized so that `diag(R) ≥ 0`. Rank deficiency shows
/// up as (near) zero diagonal entries in `R`; `Q` stays orthonormal.
pub fn economy_qr(f: &DenseMatrix) -> Result<QrFactors, LinalgError> {
    let n = f.nrows();
    let p = f.ncols();
    if p == 0 || p > n {
        return Err(LinalgError::Shape(format!(
            "economy QR needs 1 <= p <= n, got n={n}, p={p}"
        )));
    }
    let mut a = f.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = DenseMatrix::zeros(p, p);

    for k in 0..p {
        let x = &a.col(k)[k..];
        let alpha = norm2(x);
        let mut v = x.to_vec();
        if alpha == 0.0 {
            // column already zero below the diagonal block; identity reflector
            reflectors.push(Vec::new());
            r[(k, k)] = 0.0;
        } else {
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm = norm2(&v);
            v.iter_mut().for_each(|vi| *vi /= vnorm);
            for j in k..p {
                let col = &mut a.col_mut(j)[k..];
                let s = 2.0 * dot(&v, col);
                col.iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
            }
            reflectors.push(v);
        }
        for i in 0..=k {
            r[(i, k)] = a[(i, k)];
        }
    }

    // Q = H_0 H_1 ... H_{p-1} [I_p; 0]
    let mut q = DenseMatrix::zeros(n, p);
    for j in 0..p {
        q[(j, j)] = 1.0;
    }
    for k in (0..p).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..p {
            let col = &mut q.col_mut(j)[k..];
            let s = 2.0 * dot(v, col);
            if s != 0.0 {
                col.iter_mut().zip(v).for_each(|(c, vi)| *c -= s * vi);
            }
        }
    }

    for k in 0..p {
        if r[(k, k)] < 0.0 {
            for j in k..p {
                r[(k, j)] = -r[(k, j)];
            }
            q.col_mut(k).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(QrFactors { q, r })
}

/// Solves `R X = B` for upper triangular `R`.
///
/// A diagonal entry with `|r_ii| ≤ 1e-14·‖R‖_F` is treated as singular.
pub fn back_substitute(r: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let p = r.nrows();
    if r.ncols() != p || b.nrows() != p {
        return Err(LinalgError::Shape(format!(
            "back substitution needs square R matching B rows, got R {}x{}, B {}x{}",
            r.nrows(),
            r.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let threshold = 1e-14 * r.frobenius_norm();
    for i in 0..p {
        let d = r[(i, i)];
        if !(d.abs() > threshold) {
            return Err(LinalgError::Singular { index: i, pivot: d });
        }
    }
    let mut x = b.clone();
    for c in 0..b.ncols() {
        let col = x.col_mut(c);
        for i in (0..p).rev() {
            let mut s = col[i];
            for j in i + 1..p {
                s -= r[(i, j)] * col[j];
            }
            col[i] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Vector form of [`back_substitute`].
pub fn back_substitute_vec(r: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let bm = DenseMatrix::from_columns(b.len(), &[b])?;
    Ok(back_substitute(r, &bm)?.col(0).to_vec())
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
///
/// A pivot that is not safely positive (relative to the largest diagonal
/// entry) is reported as singular.
pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let p = a.nrows();
    if a.ncols() != p || b.len() != p {
        return Err(LinalgError::Shape(format!(
            "cholesky needs a square system, got {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let scale = (0..p).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tiny = scale * 1e-14;
    let mut l = DenseMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tiny) {
            return Err(LinalgError::Singular { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    let mut z = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            z[i] -= l[(i, k)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            z[i] -= l[(k, i)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    Ok(z)
}
