mod common;

use aapdhg::lp_model::mps::{parse_mps, parse_mps_file, write_mps};
use aapdhg::lp_model::{to_standard_form, ProblemData};
use aapdhg::solver::{solve, Method, SolverConfig};
use common::*;

fn load(name: &str) -> ProblemData {
    to_standard_form(&parse_mps_file(data_path(name)).unwrap()).unwrap()
}

#[test]
fn netlib_instances_have_expected_shapes() {
    // (file, rows, columns, nonzeros of K)
    for (file, rows, cols, nnz) in [
        ("afiro.mps", 27, 32, 83),
        ("25fv47.mps", 821, 1571, 10400),
        ("80bau3b.mps", 2262, 9799, 21002),
        ("greenbea.mps", 2392, 5405, 30877),
    ] {
        let p = load(file);
        assert_eq!((p.num_rows(), p.num_cols(), p.k().nnz()), (rows, cols, nnz), "{file}");
        assert!(p.lower().iter().zip(p.upper()).all(|(l, u)| l <= u));
    }
}

#[test]
fn toy_instance_matches_hand_built_problem() {
    let p = load("toy.mps");
    let q = toy();
    assert_eq!(p.k().to_dense(), q.k().to_dense());
    assert_eq!(p.q(), q.q());
    assert_eq!(p.num_ineq(), 0);
    assert_eq!(p.lower(), q.lower());
    assert_eq!(p.upper(), q.upper());
}

#[test]
fn afiro_reaches_known_optimum() {
    let p = load("afiro.mps");
    let cfg = SolverConfig {
        method: Method::FaaPdhg,
        toll: 1e-6,
        max_iters: 200_000,
        ..SolverConfig::default()
    };
    let (res, _) = solve(&p, &cfg, None).unwrap();
    assert!(res.status.converged(), "{}", res.status);
    assert!((res.objective - (-464.753_142_86)).abs() < 1e-2, "{}", res.objective);
}

#[test]
fn written_instances_parse_back_to_the_same_blocks() {
    for file in ["afiro.mps", "25fv47.mps"] {
        let p = load(file);
        let q = to_standard_form(&parse_mps(&write_mps(&p)).unwrap()).unwrap();
        assert_eq!(p.num_ineq(), q.num_ineq(), "{file}");
        assert_eq!(p.c(), q.c(), "{file}");
        assert_eq!(p.lower(), q.lower(), "{file}");
        assert_eq!(p.upper(), q.upper(), "{file}");
        // rows may be reordered within each block; compare them as sorted
        // sets (a negated zero right-hand side reads back as +0)
        let rows = |p: &ProblemData| {
            let dense = p.k().to_dense();
            let mut r: Vec<(bool, Vec<u64>, u64)> = dense
                .iter()
                .zip(p.q())
                .enumerate()
                .map(|(i, (row, rhs))| (i < p.num_ineq(), row.iter().map(|v| (v + 0.0).to_bits()).collect(), (rhs + 0.0).to_bits()))
                .collect();
            r.sort();
            r
        };
        assert!(rows(&p) == rows(&q), "{file}");
    }
}
