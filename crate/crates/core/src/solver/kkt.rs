//! Relative KKT residuals used to judge solution quality.

use serde::Serialize;

use crate::linalg::{norm2, LinalgError};
use crate::lp_model::{LambdaSpec, ProblemData};
use crate::pdhg::{project_lambda, Iterate};

/// Relative duality gap, primal infeasibility and dual infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktMetrics {
    pub r_gap: f64,
    pub r_primal: f64,
    pub r_dual: f64,
}

impl KktMetrics {
    pub fn max(&self) -> f64 {
        self.r_gap.max(self.r_primal).max(self.r_dual)
    }

    pub fn within(&self, eps: f64) -> bool {
        self.r_gap <= eps && self.r_primal <= eps && self.r_dual <= eps
    }
}

/// KKT residuals at `u` together with the reduced costs `λ = P_Λ(c − Kᵀy)`.
pub fn kkt_metrics(u: &Iterate, p: &ProblemData, spec: &LambdaSpec) -> Result<(KktMetrics, Vec<f64>), LinalgError> {
    let kt_y = p.k().matvec_transpose(u.y())?;
    kkt_metrics_with(u.x(), u.y(), &kt_y, p, spec)
}

/// Same as [`kkt_metrics`] with `Kᵀy` supplied by the caller.
pub fn kkt_metrics_with(
    x: &[f64],
    y: &[f64],
    kt_y: &[f64],
    p: &ProblemData,
    spec: &LambdaSpec,
) -> Result<(KktMetrics, Vec<f64>), LinalgError> {
    let n = p.num_cols();
    if x.len() != n || kt_y.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: x.len().min(kt_y.len()),
        });
    }
    if y.len() != p.num_rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: p.num_rows(),
            found: y.len(),
        });
    }
    let c = p.c();
    let q = p.q();
    let m1 = p.num_ineq();

    let mut lambda: Vec<f64> = c.iter().zip(kt_y).map(|(ci, ki)| ci - ki).collect();
    project_lambda(&mut lambda, spec);

    // primal: (b − Ax; (h − Gx)₊)
    let kx = p.k().matvec(x)?;
    let primal: Vec<f64> = kx
        .iter()
        .zip(q)
        .enumerate()
        .map(|(i, (k, qi))| {
            let r = qi - k;
            if i < m1 {
                r.max(0.0)
            } else {
                r
            }
        })
        .collect();
    let r_primal = norm2(&primal) / (1.0 + norm2(q));

    let dual: Vec<f64> = c
        .iter()
        .zip(kt_y)
        .zip(&lambda)
        .map(|((ci, ki), li)| ci - ki - li)
        .collect();
    let r_dual = norm2(&dual) / (1.0 + norm2(c));

    let mut dual_obj: f64 = q.iter().zip(y).map(|(a, b)| a * b).sum();
    for ((&l, &u), &lam) in p.lower().iter().zip(p.upper()).zip(&lambda) {
        if lam > 0.0 && l.is_finite() {
            dual_obj += l * lam;
        } else if lam < 0.0 && u.is_finite() {
            dual_obj += u * lam;
        }
    }
    let primal_obj: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
    let r_gap = (dual_obj - primal_obj).abs() / (1.0 + dual_obj.abs() + primal_obj.abs());

    Ok((
        KktMetrics {
            r_gap,
            r_primal,
            r_dual,
        },
        lambda,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn box_only_optimum_has_zero_residuals() {
        // min −x, 0 ≤ x ≤ 1
        let p = ProblemData::new(
            SparseMatrix::zeros(0, 1),
            SparseMatrix::zeros(0, 1),
            vec![-1.0],
            vec![],
            vec![],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let u = Iterate::new(vec![1.0], vec![]);
        let (m, lambda) = kkt_metrics(&u, &p, &p.lambda_spec()).unwrap();
        assert_eq!(lambda, vec![-1.0]);
        assert_eq!(m, KktMetrics { r_gap: 0.0, r_primal: 0.0, r_dual: 0.0 });
    }

    #[test]
    fn toy_fixed_point_is_optimal() {
        let p = ProblemData::new(
            SparseMatrix::zeros(0, 1),
            SparseMatrix::identity(1),
            vec![0.0],
            vec![],
            vec![3.0],
            vec![0.0],
            vec![INF],
        )
        .unwrap();
        let (m, lambda) = kkt_metrics(&Iterate::new(vec![3.0], vec![0.0]), &p, &p.lambda_spec()).unwrap();
        assert_eq!(lambda, vec![0.0]);
        assert!(m.within(0.0));
    }

    #[test]
    fn primal_residual_matches_hand_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = vec![vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 1.0]];
        let a = vec![vec![1.0, 1.0, 1.0]];
        let h = vec![1.0, 0.5];
        let b = vec![2.0];
        let p = ProblemData::new(
            SparseMatrix::from_dense(&g, 3).unwrap(),
            SparseMatrix::from_dense(&a, 3).unwrap(),
            vec![1.0, 1.0, 1.0],
            h.clone(),
            b.clone(),
            vec![0.0; 3],
            vec![INF; 3],
        )
        .unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.3)).collect();
            let u = Iterate::new(x.clone(), vec![0.0; 3]);
            let (m, _) = kkt_metrics(&u, &p, &p.lambda_spec()).unwrap();
            let mut sq = 0.0;
            let ax: f64 = x.iter().sum();
            sq += (b[0] - ax).powi(2);
            for (row, hi) in g.iter().zip(&h) {
                let gx: f64 = row.iter().zip(&x).map(|(r, v)| r * v).sum();
                sq += (hi - gx).max(0.0).powi(2);
            }
            let qn = (1.0f64 + 0.25 + 4.0).sqrt();
            let expect = sq.sqrt() / (1.0 + qn);
            assert!(m.r_primal > 0.0);
            assert!((m.r_primal - expect).abs() <= 1e-14);
        }
    }
}
