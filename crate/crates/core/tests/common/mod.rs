#![allow(dead_code)]

use std::path::PathBuf;

use aapdhg::linalg::SparseMatrix;
use aapdhg::lp_model::ProblemData;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const INF: f64 = f64::INFINITY;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data").join(name)
}

pub fn lp(
    g: &[Vec<f64>],
    a: &[Vec<f64>],
    c: Vec<f64>,
    h: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
) -> ProblemData {
    let n = c.len();
    ProblemData::new(
        SparseMatrix::from_dense(g, n).unwrap(),
        SparseMatrix::from_dense(a, n).unwrap(),
        c,
        h,
        b,
        lower,
        upper,
    )
    .unwrap()
}

/// min 0·x s.t. x = 3, x ≥ 0
pub fn toy() -> ProblemData {
    lp(&[], &[vec![1.0]], vec![0.0], vec![], vec![3.0], vec![0.0], vec![INF])
}

/// A feasible LP with a finite optimum and `n` variables.
///
/// A feasible point `x0` is drawn first; inequality right-hand sides sit
/// below `G x0` and equality right-hand sides equal `A x0`. Variables are
/// either boxed or bounded below with a positive cost, so the objective is
/// bounded below on the feasible set.
pub fn random_feasible_lp(rng: &mut ChaCha8Rng, n: usize) -> ProblemData {
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let mut c = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut upper = vec![INF; n];
    for j in 0..n {
        match rng.random_range(0..3) {
            0 => {
                upper[j] = x0[j] + rng.random_range(0.5..3.0);
                c[j] = rng.random_range(-2.0..2.0);
            }
            1 => {
                c[j] = rng.random_range(0.1..2.0);
            }
            _ => {
                lower[j] = -rng.random_range(0.0..2.0);
                upper[j] = x0[j] + rng.random_range(0.5..3.0);
                c[j] = rng.random_range(-2.0..2.0);
            }
        }
    }
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(-2.0..2.0) })
            .collect()
    };
    let m1 = rng.random_range(0..=3);
    let m2 = rng.random_range(0..=(n.saturating_sub(1)).min(2));
    let g: Vec<Vec<f64>> = (0..m1).map(|_| row(rng)).collect();
    let a: Vec<Vec<f64>> = (0..m2).map(|_| row(rng)).collect();
    let dotp = |r: &Vec<f64>| r.iter().zip(&x0).map(|(p, q)| p * q).sum::<f64>();
    let h: Vec<f64> = g.iter().map(|r| dotp(r) - rng.random_range(0.0..1.0)).collect();
    let b: Vec<f64> = a.iter().map(dotp).collect();
    lp(&g, &a, c, h, b, lower, upper)
}

/// Small LPs with degenerate or non-unique optima.
pub fn degenerate_cases() -> Vec<(&'static str, ProblemData)> {
    vec![
        (
            "optimal segment",
            lp(&[vec![1.0, 1.0]], &[], vec![1.0, 1.0], vec![1.0], vec![], vec![0.0; 2], vec![INF; 2]),
        ),
        (
            "overdetermined vertex",
            lp(
                &[vec![-1.0, -1.0], vec![1.0, -1.0]],
                &[],
                vec![-1.0, -1.0],
                vec![-2.0, 0.0],
                vec![],
                vec![0.0; 2],
                vec![1.0; 2],
            ),
        ),
        (
            "duplicate rows",
            lp(
                &[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]],
                &[],
                vec![1.0, 2.0],
                vec![1.0, 1.0, 2.0],
                vec![],
                vec![0.0; 2],
                vec![INF; 2],
            ),
        ),
        (
            "free variable pinned by equality",
            lp(&[], &[vec![1.0, -1.0]], vec![1.0, 0.0], vec![], vec![0.0], vec![-INF, 1.0], vec![INF, 3.0]),
        ),
        (
            "fixed variable",
            lp(&[vec![1.0, 1.0]], &[], vec![1.0, 1.0], vec![3.0], vec![], vec![2.0, 0.0], vec![2.0, INF]),
        ),
        ("toy feasibility", toy()),
        (
            "zero objective",
            lp(&[vec![1.0, 1.0]], &[], vec![0.0, 0.0], vec![1.0], vec![], vec![0.0; 2], vec![1.0; 2]),
        ),
    ]
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Dense spectral norm via SVD.
pub fn spectral_norm(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_fn(rows, cols, f);
    m.singular_values().max()
}
