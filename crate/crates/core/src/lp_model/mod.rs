//! The linear program in four-block form
//!
//! ```text
//! min  cᵀx   s.t.  G x ≥ h,   A x = b,   l ≤ x ≤ u
//! ```
//!
//! together with the stacked operator `K = [G; A]`, right-hand side
//! `q = [h; b]`, and the per-coordinate sign set `Λ` of the reduced costs.

pub mod mps;

use thiserror::Error;

use crate::linalg::{dot, LinalgError, SparseMatrix};

pub use mps::{parse_mps, parse_mps_file, write_mps, MpsError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("inconsistent bounds on column {column}: lower {lower} > upper {upper}")]
    InconsistentBounds { column: String, lower: f64, upper: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

/// A linear program in four-block form, plus the derived `K` and `q`.
///
/// Infinite bounds are stored as `f64::NEG_INFINITY` / `f64::INFINITY`.
/// The data always describes a minimization; `sense` and
/// `objective_constant` only affect [`ProblemData::reported_objective`].
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub name: String,
    k: SparseMatrix,
    m1: usize,
    c: Vec<f64>,
    q: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub row_names: Vec<String>,
    pub col_names: Vec<String>,
    pub sense: ObjectiveSense,
    pub objective_constant: f64,
}

impl ProblemData {
    /// Assembles and validates the four blocks.
    pub fn new(
        g: SparseMatrix,
        a: SparseMatrix,
        c: Vec<f64>,
        h: Vec<f64>,
        b: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = c.len();
        let check = |what, expected, found| {
            if expected != found {
                Err(ModelError::Dimension { what, expected, found })
            } else {
                Ok(())
            }
        };
        check("G columns", n, g.ncols())?;
        check("A columns", n, a.ncols())?;
        check("h", g.nrows(), h.len())?;
        check("b", a.nrows(), b.len())?;
        check("lower bounds", n, lower.len())?;
        check("upper bounds", n, upper.len())?;
        if c.iter().chain(&h).chain(&b).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("c, h or b"));
        }
        let col_names: Vec<String> = (0..n).map(|j| format!("x{j}")).collect();
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(ModelError::InconsistentBounds {
                    column: col_names[j].clone(),
                    lower: l,
                    upper: u,
                });
            }
        }
        let m1 = g.nrows();
        let row_names = (0..m1)
            .map(|i| format!("g{i}"))
            .chain((0..a.nrows()).map(|i| format!("a{i}")))
            .collect();
        let k = SparseMatrix::vstack(&g, &a)?;
        let mut q = h;
        q.extend(b);
        Ok(Self {
            name: "lp".to_string(),
            k,
            m1,
            c,
            q,
            lower,
            upper,
            row_names,
            col_names,
            sense: ObjectiveSense::Minimize,
            objective_constant: 0.0,
        })
    }

    /// Replaces the generated row/column names.
    pub fn with_names(mut self, rows: Vec<String>, cols: Vec<String>) -> Self {
        assert_eq!(rows.len(), self.num_rows());
        assert_eq!(cols.len(), self.num_cols());
        self.row_names = rows;
        self.col_names = cols;
        self
    }

    pub fn num_cols(&self) -> usize {
        self.c.len()
    }

    /// Number of inequality rows (`m1`).
    pub fn num_ineq(&self) -> usize {
        self.m1
    }

    /// Number of equality rows (`m2`).
    pub fn num_eq(&self) -> usize {
        self.k.nrows() - self.m1
    }

    pub fn num_rows(&self) -> usize {
        self.k.nrows()
    }

    /// Stacked constraint matrix `K = [G; A]`.
    pub fn k(&self) -> &SparseMatrix {
        &self.k
    }

    pub fn g(&self) -> SparseMatrix {
        self.k.row_slice(0, self.m1)
    }

    pub fn a(&self) -> SparseMatrix {
        self.k.row_slice(self.m1, self.k.nrows())
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Stacked right-hand side `q = [h; b]`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn h(&self) -> &[f64] {
        &self.q[..self.m1]
    }

    pub fn b(&self) -> &[f64] {
        &self.q[self.m1..]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lambda_spec(&self) -> LambdaSpec {
        build_lambda_set(&self.lower, &self.upper)
    }

    /// `cᵀx`
    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// Objective in the sense of the original input (maximization
    /// instances are negated back, the constant is added).
    pub fn reported_objective(&self, x: &[f64]) -> f64 {
        let v = self.objective(x) + self.objective_constant;
        match self.sense {
            ObjectiveSense::Minimize => v,
            ObjectiveSense::Maximize => -v,
        }
    }
}

/// Sign constraint on one reduced-cost coordinate `λ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaTag {
    /// `{0}`: the variable is free.
    Zero,
    /// `ℝ₋`: only an upper bound.
    NonPos,
    /// `ℝ₊`: only a lower bound.
    NonNeg,
    /// `ℝ`: boxed.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaSpec {
    pub tags: Vec<LambdaTag>,
}

/// Classifies each coordinate by the finiteness of its bounds.
pub fn build_lambda_set(lower: &[f64], upper: &[f64]) -> LambdaSpec {
    debug_assert_eq!(lower.len(), upper.len());
    let tags = lower
        .iter()
        .zip(upper)
        .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
            (false, false) => LambdaTag::Zero,
            (false, true) => LambdaTag::NonPos,
            (true, false) => LambdaTag::NonNeg,
            (true, true) => LambdaTag::Free,
        })
        .collect();
    LambdaSpec { tags }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `row·x = rhs`
    Equal,
    /// `row·x ≥ rhs`
    Greater,
    /// `row·x ≤ rhs`
    Less,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    /// Integrality marker from the input. Always relaxed.
    pub integer: bool,
}

/// An LP as read from a file, before conversion to four-block form.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLp {
    pub name: String,
    pub sense: ObjectiveSense,
    pub objective_name: String,
    /// Constant term of the objective (MPS stores its negation as the
    /// right-hand side of the objective row).
    pub objective_constant: f64,
    pub rows: Vec<RawRow>,
    pub columns: Vec<RawColumn>,
    /// `(row, column, value)` constraint coefficients.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Converts a raw LP into four-block form.
///
/// Equality rows go to `(A, b)`, `≥` rows to `(G, h)`, and `≤` rows are
/// negated into `(G, h)`. Row order within each block follows the input.
/// Maximization objectives are negated.
pub fn to_standard_form(raw: &RawLp) -> Result<ProblemData, ModelError> {
    let n = raw.columns.len();
    // position of each raw row inside its block, and its sign
    let mut g_rows = Vec::new();
    let mut a_rows = Vec::new();
    let mut placement = vec![(false, 0usize, 1.0f64); raw.rows.len()];
    for (i, row) in raw.rows.iter().enumerate() {
        match row.kind {
            RowKind::Equal => {
                placement[i] = (false, a_rows.len(), 1.0);
                a_rows.push(i);
            }
            RowKind::Greater => {
                placement[i] = (true, g_rows.len(), 1.0);
                g_rows.push(i);
            }
            RowKind::Less => {
                placement[i] = (true, g_rows.len(), -1.0);
                g_rows.push(i);
            }
        }
    }
    let mut g_trip = Vec::new();
    let mut a_trip = Vec::new();
    for &(r, c, v) in &raw.entries {
        let (in_g, pos, sign) = placement[r];
        if in_g {
            g_trip.push((pos, c, sign * v));
        } else {
            a_trip.push((pos, c, v));
        }
    }
    let g = SparseMatrix::from_triplets(g_rows.len(), n, &g_trip)?;
    let a = SparseMatrix::from_triplets(a_rows.len(), n, &a_trip)?;
    let h: Vec<f64> = g_rows
        .iter()
        .map(|&i| placement[i].2 * raw.rows[i].rhs)
        .collect();
    let b: Vec<f64> = a_rows.iter().map(|&i| raw.rows[i].rhs).collect();

    let sign = match raw.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let c: Vec<f64> = raw.columns.iter().map(|col| sign * col.cost).collect();
    let lower: Vec<f64> = raw.columns.iter().map(|col| col.lower).collect();
    let upper: Vec<f64> = raw.columns.iter().map(|col| col.upper).collect();
    for col in &raw.columns {
        if col.lower.is_nan() || col.upper.is_nan() || col.lower > col.upper {
            return Err(ModelError::InconsistentBounds {
                column: col.name.clone(),
                lower: col.lower,
                upper: col.upper,
            });
        }
    }

    let mut p = ProblemData::new(g, a, c, h, b, lower, upper).map_err(|e| match e {
        ModelError::InconsistentBounds { column, lower, upper } => {
            // translate generated name back to the input's column name
            let name = column
                .strip_prefix('x')
                .and_then(|s| s.parse::<usize>().ok())
                .and_then(|j| raw.columns.get(j))
                .map_or(column, |c| c.name.clone());
            ModelError::InconsistentBounds { column: name, lower, upper }
        }
        other => other,
    })?;
    let row_names = g_rows
        .iter()
        .chain(&a_rows)
        .map(|&i| raw.rows[i].name.clone())
        .collect();
    let col_names = raw.columns.iter().map(|c| c.name.clone()).collect();
    p = p.with_names(row_names, col_names);
    p.name = raw.name.clone();
    p.sense = raw.sense;
    p.objective_constant = sign * raw.objective_constant;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn lambda_case_table() {
        let spec = build_lambda_set(&[-INF, 0.0, -INF, 1.0], &[INF, INF, 5.0, 2.0]);
        assert_eq!(
            spec.tags,
            vec![LambdaTag::Zero, LambdaTag::NonNeg, LambdaTag::NonPos, LambdaTag::Free]
        );
    }

    fn raw_with_rows(rows: Vec<(RowKind, Vec<f64>, f64)>, n: usize) -> RawLp {
        let mut entries = Vec::new();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, (kind, coeffs, rhs))| {
                for (j, v) in coeffs.into_iter().enumerate() {
                    if v != 0.0 {
                        entries.push((i, j, v));
                    }
                }
                RawRow { name: format!("r{i}"), kind, rhs }
            })
            .collect();
        RawLp {
            name: "t".into(),
            sense: ObjectiveSense::Minimize,
            objective_name: "obj".into(),
            objective_constant: 0.0,
            rows,
            columns: (0..n)
                .map(|j| RawColumn {
                    name: format!("c{j}"),
                    cost: 1.0,
                    lower: 0.0,
                    upper: INF,
                    integer: false,
                })
                .collect(),
            entries,
        }
    }

    #[test]
    fn less_row_is_negated_into_g() {
        let raw = raw_with_rows(vec![(RowKind::Less, vec![1.0], 4.0)], 1);
        let p = to_standard_form(&raw).unwrap();
        assert_eq!(p.num_ineq(), 1);
        assert_eq!(p.g().to_dense(), vec![vec![-1.0]]);
        assert_eq!(p.h(), &[-4.0]);
    }

    #[test]
    fn equality_row_maps_to_a() {
        let raw = raw_with_rows(vec![(RowKind::Equal, vec![1.0, 1.0], 1.0)], 2);
        let p = to_standard_form(&raw).unwrap();
        assert_eq!(p.num_eq(), 1);
        assert_eq!(p.a().to_dense(), vec![vec![1.0, 1.0]]);
        assert_eq!(p.b(), &[1.0]);
    }

    #[test]
    fn mixed_block_shapes() {
        let raw = raw_with_rows(
            vec![
                (RowKind::Equal, vec![1.0, 0.0], 1.0),
                (RowKind::Greater, vec![0.0, 1.0], 0.5),
                (RowKind::Equal, vec![1.0, -1.0], 0.0),
                (RowKind::Less, vec![2.0, 3.0], 7.0),
            ],
            2,
        );
        let p = to_standard_form(&raw).unwrap();
        assert_eq!((p.num_ineq(), p.num_eq()), (2, 2));
        assert_eq!(p.row_names, vec!["r1", "r3", "r0", "r2"]);
        assert_eq!(p.q(), &[0.5, -7.0, 1.0, 0.0]);
    }

    #[test]
    fn maximization_is_negated() {
        let mut raw = raw_with_rows(vec![], 2);
        raw.sense = ObjectiveSense::Maximize;
        raw.objective_constant = 2.0;
        let p = to_standard_form(&raw).unwrap();
        assert_eq!(p.c(), &[-1.0, -1.0]);
        // original objective at x = (1, 1) is 1 + 1 + 2
        assert_eq!(p.reported_objective(&[1.0, 1.0]), 4.0);
    }

    #[test]
    fn crossed_bounds_are_rejected() {
        let mut raw = raw_with_rows(vec![], 1);
        raw.columns[0].lower = 3.0;
        raw.columns[0].upper = 1.0;
        match to_standard_form(&raw) {
            Err(ModelError::InconsistentBounds { column, .. }) => assert_eq!(column, "c0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_checks() {
        let g = SparseMatrix::zeros(1, 2);
        let a = SparseMatrix::zeros(0, 2);
        let err = ProblemData::new(g, a, vec![0.0; 2], vec![], vec![], vec![0.0; 2], vec![INF; 2]);
        assert!(matches!(err, Err(ModelError::Dimension { what: "h", .. })));
    }
}
