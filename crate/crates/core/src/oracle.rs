//! Brute-force reference solver for tiny LPs.
//!
//! Every constraint (inequality rows, equality rows and finite bounds) is
//! written as `aᵢᵀx ≥ bᵢ` or `aᵢᵀx = bᵢ`. The lineality space of the
//! feasible set is removed first, so the polyhedron is pointed; then every
//! basic solution (n linearly independent active constraints) is checked
//! for feasibility, and every extreme ray of the recession cone
//! (n − 1 independent active homogeneous constraints) is checked for
//! descent. Exhaustive, so only meant for a handful of variables.

use log::debug;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::dot;
use crate::lp_model::ProblemData;

pub const MAX_VARS: usize = 6;
pub const MAX_ROWS: usize = 24;

const FEAS_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {vars} variables, {rows} constraint rows (limits {MAX_VARS} and {MAX_ROWS})")]
    TooLarge { vars: usize, rows: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OracleStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub status: OracleStatus,
    /// A minimizing vertex (lexicographically smallest among ties); empty
    /// unless optimal.
    pub x: Vec<f64>,
    /// `cᵀx` in the minimization form; `±∞` for unbounded / infeasible.
    pub objective: f64,
}

#[derive(Debug, Clone)]
struct Row {
    a: Vec<f64>,
    b: f64,
    equality: bool,
}

fn constraint_rows(p: &ProblemData) -> Vec<Row> {
    let n = p.num_cols();
    let m1 = p.num_ineq();
    let mut rows = Vec::new();
    for (i, &qi) in p.q().iter().enumerate() {
        let mut a = vec![0.0; n];
        for (j, v) in p.k().row(i) {
            a[j] = v;
        }
        rows.push(Row {
            a,
            b: qi,
            equality: i >= m1,
        });
    }
    for j in 0..n {
        let (l, u) = (p.lower()[j], p.upper()[j]);
        let mut e = vec![0.0; n];
        if l.is_finite() && u.is_finite() && l == u {
            e[j] = 1.0;
            rows.push(Row { a: e, b: l, equality: true });
            continue;
        }
        if l.is_finite() {
            e[j] = 1.0;
            rows.push(Row { a: e.clone(), b: l, equality: false });
        }
        if u.is_finite() {
            e[j] = -1.0;
            rows.push(Row { a: e, b: -u, equality: false });
        }
    }
    rows
}

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(m: &mut [Vec<f64>], ncols: usize) -> Vec<usize> {
    let scale = m
        .iter()
        .flat_map(|r| r.iter().take(ncols))
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max(1.0);
    let tol = RANK_TOL * scale;
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == m.len() {
            break;
        }
        let (best, val) = (row..m.len())
            .map(|r| (r, m[r][col].abs()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap(row, best);
        let piv = m[row][col];
        m[row].iter_mut().for_each(|v| *v /= piv);
        for r in 0..m.len() {
            if r != row {
                let factor = m[r][col];
                if factor != 0.0 {
                    let (src, dst) = if r < row {
                        let (lo, hi) = m.split_at_mut(row);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = m.split_at_mut(r);
                        (&lo[row], &mut hi[0])
                    };
                    dst.iter_mut().zip(src.iter()).for_each(|(d, s)| *d -= factor * s);
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Basis of `{d : A d = 0}`.
fn null_space(a: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let pivots = rref(&mut m, n);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut d = vec![0.0; n];
            d[fc] = 1.0;
            for (r, &pc) in pivots.iter().enumerate() {
                d[pc] = -m[r][fc];
            }
            d
        })
        .collect()
}

/// Unique solution of the square system, if nonsingular.
fn solve_square(a: &[&Row], n: usize) -> Option<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .map(|r| {
            let mut v = r.a.clone();
            v.push(r.b);
            v
        })
        .collect();
    let pivots = rref(&mut m, n);
    if pivots.len() < n {
        return None;
    }
    Some((0..n).map(|i| m[i][n]).collect())
}

fn feasible(rows: &[Row], x: &[f64]) -> bool {
    rows.iter().all(|r| {
        let v = dot(&r.a, x);
        let tol = FEAS_TOL * (1.0 + r.b.abs());
        if r.equality {
            (v - r.b).abs() <= tol
        } else {
            v >= r.b - tol
        }
    })
}

fn in_recession_cone(rows: &[Row], d: &[f64]) -> bool {
    let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    rows.iter().all(|r| {
        let v = dot(&r.a, d);
        let tol = FEAS_TOL * dn * (1.0 + r.a.iter().map(|x| x * x).sum::<f64>().sqrt());
        if r.equality {
            v.abs() <= tol
        } else {
            v >= -tol
        }
    })
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for q in pos..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Solves a tiny LP exactly by enumeration.
pub fn solve_tiny(p: &ProblemData) -> Result<OracleResult, OracleError> {
    let n = p.num_cols();
    let mut rows = constraint_rows(p);
    if n > MAX_VARS || rows.len() > MAX_ROWS {
        return Err(OracleError::TooLarge {
            vars: n,
            rows: rows.len(),
        });
    }
    let c = p.c();

    // Lineality space: directions along which every constraint is constant.
    let all: Vec<Vec<f64>> = rows.iter().map(|r| r.a.clone()).collect();
    let lineality = null_space(&all, n);
    let mut along_lineality = false;
    for d in &lineality {
        if dot(c, d).abs() > RANK_TOL * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>()) {
            along_lineality = true;
        }
        rows.push(Row {
            a: d.clone(),
            b: 0.0,
            equality: true,
        });
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        let obj = dot(c, &x);
        match &best {
            None => best = Some((obj, x)),
            Some((bo, bx)) => {
                let tie = FEAS_TOL * (1.0 + bo.abs());
                if obj < bo - tie || ((obj - bo).abs() <= tie && lex_less(&x, bx)) {
                    best = Some((obj, x));
                }
            }
        }
    };
    if n == 0 {
        if feasible(&rows, &[]) {
            consider(Vec::new());
        }
    } else {
        for_each_subset(rows.len(), n, |idx| {
            let sel: Vec<&Row> = idx.iter().map(|&i| &rows[i]).collect();
            if let Some(x) = solve_square(&sel, n) {
                if feasible(&rows, &x) {
                    consider(x);
                }
            }
        });
    }

    let Some((objective, x)) = best else {
        return Ok(OracleResult {
            status: OracleStatus::Infeasible,
            x: Vec::new(),
            objective: f64::INFINITY,
        });
    };
    if along_lineality {
        return Ok(unbounded());
    }

    // Extreme rays of the (pointed) recession cone.
    let mut improving = false;
    if n >= 1 {
        let c_scale = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for_each_subset(rows.len(), n - 1, |idx| {
            if improving {
                return;
            }
            let sel: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].a.clone()).collect();
            let ns = null_space(&sel, n);
            if ns.len() != 1 {
                return;
            }
            for sign in [1.0, -1.0] {
                let d: Vec<f64> = ns[0].iter().map(|v| sign * v).collect();
                let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if dot(c, &d) < -RANK_TOL * c_scale * dn && in_recession_cone(&rows, &d) {
                    debug!("oracle: improving ray {d:?}");
                    improving = true;
                }
            }
        });
    }
    if improving {
        return Ok(unbounded());
    }
    Ok(OracleResult {
        status: OracleStatus::Optimal,
        x,
        objective,
    })
}

fn unbounded() -> OracleResult {
    OracleResult {
        status: OracleStatus::Unbounded,
        x: Vec::new(),
        objective: f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    const INF: f64 = f64::INFINITY;

    fn lp(g: &[Vec<f64>], a: &[Vec<f64>], c: Vec<f64>, h: Vec<f64>, b: Vec<f64>, l: Vec<f64>, u: Vec<f64>) -> ProblemData {
        let n = c.len();
        ProblemData::new(
            SparseMatrix::from_dense(g, n).unwrap(),
            SparseMatrix::from_dense(a, n).unwrap(),
            c,
            h,
            b,
            l,
            u,
        )
        .unwrap()
    }

    #[test]
    fn subsets_enumerate_binomially() {
        let mut count = 0;
        for_each_subset(6, 3, |_| count += 1);
        assert_eq!(count, 20);
        let mut seen = Vec::new();
        for_each_subset(3, 0, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![Vec::<usize>::new()]);
        let mut seen = Vec::new();
        for_each_subset(3, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn box_problem() {
        let p = lp(&[], &[], vec![-1.0], vec![], vec![], vec![0.0], vec![1.0]);
        let r = solve_tiny(&p).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert_eq!(r.x, vec![1.0]);
        assert_eq!(r.objective, -1.0);
    }

    #[test]
    fn toy_feasibility_problem() {
        let p = lp(&[], &[vec![1.0]], vec![0.0], vec![], vec![3.0], vec![0.0], vec![INF]);
        let r = solve_tiny(&p).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-12);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn degenerate_segment_optimum() {
        let p = lp(&[vec![1.0, 1.0]], &[], vec![1.0, 1.0], vec![1.0], vec![], vec![0.0; 2], vec![INF; 2]);
        let r = solve_tiny(&p).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
        // lexicographically smallest optimal vertex
        assert!((r.x[0]).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_and_infeasible() {
        let p = lp(&[], &[], vec![-1.0], vec![], vec![], vec![0.0], vec![INF]);
        assert_eq!(solve_tiny(&p).unwrap().status, OracleStatus::Unbounded);

        // free variable with nonzero cost
        let p = lp(&[], &[], vec![1.0], vec![], vec![], vec![-INF], vec![INF]);
        assert_eq!(solve_tiny(&p).unwrap().status, OracleStatus::Unbounded);

        // x ≥ 2 and x ≤ 1
        let p = lp(&[vec![1.0]], &[], vec![1.0], vec![2.0], vec![], vec![-INF], vec![1.0]);
        assert_eq!(solve_tiny(&p).unwrap().status, OracleStatus::Infeasible);
    }

    #[test]
    fn free_directions_with_zero_cost() {
        // min x1 s.t. x1 ≥ 1, x2 free: lineality along x2 with zero cost
        let p = lp(&[vec![1.0, 0.0]], &[], vec![1.0, 0.0], vec![1.0], vec![], vec![-INF; 2], vec![INF; 2]);
        let r = solve_tiny(&p).unwrap();
        assert_eq!(r.status, OracleStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_large_is_rejected() {
        let n = 7;
        let p = lp(&[], &[], vec![0.0; n], vec![], vec![], vec![0.0; n], vec![1.0; n]);
        assert!(matches!(solve_tiny(&p), Err(OracleError::TooLarge { .. })));
    }
}
