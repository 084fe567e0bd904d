//! SPD linear solves and the principal eigenpair of the Neumann operator.
//!
//! The solver is a Jacobi-preconditioned conjugate gradient iteration with a
//! sup-norm stopping test on the true residual; the eigenpair comes from
//! inverse power iteration. Both are deterministic: fixed starting vectors,
//! fixed iteration order.

use crate::error::{Error, Result};
use crate::grid::{Field, NeumannOperator};

pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;

/// Principal eigenpair of `A`: smallest eigenvalue with its positive,
/// sup-normalized eigenfunction. For the pure Neumann operator this is
/// exactly `(1, constant 1)`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi1: Field,
    pub iterations: usize,
    pub residual: f64,
}

impl EigenPair {
    /// Maximum of the eigenfunction (1 by normalization).
    pub fn mu_bar(&self) -> f64 {
        self.phi1.max()
    }

    /// Minimum of the eigenfunction; positive for the principal pair.
    pub fn mu_underbar(&self) -> f64 {
        self.phi1.min()
    }
}

/// Solve `A x = f` to `||A x - f||_inf <= tol`.
///
/// The initial guess is `f` itself, which makes solves with constant
/// right-hand sides exact in one step (constants are fixed by `A`).
pub fn solve_linear(op: &NeumannOperator, rhs: &Field, tol: f64) -> Result<Field> {
    solve_linear_with(op, rhs, tol, 40 * op.n() + 200)
}

/// `solve_linear` with an explicit iteration cap.
pub fn solve_linear_with(
    op: &NeumannOperator,
    rhs: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<Field> {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = op.n();
    let m = op.matrix();
    let inv_diag: Vec<f64> = m.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut x = rhs.values().to_vec();
    let mut ax = vec![0.0; n];
    m.apply_slice(&x, &mut ax);
    let mut r: Vec<f64> = rhs.values().iter().zip(&ax).map(|(f, a)| f - a).collect();

    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut history = Vec::new();
    let mut res = sup(&r);
    history.push(res);
    if res <= tol {
        return Field::from_values(op.grid(), x);
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];

    for it in 0..max_iter {
        m.apply_slice(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: res,
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // Recompute the residual exactly every 50 steps to stop drift.
        if it % 50 == 49 {
            m.apply_slice(&x, &mut ax);
            for i in 0..n {
                r[i] = rhs.values()[i] - ax[i];
            }
        }
        res = sup(&r);
        history.push(res);
        if res <= tol {
            // Confirm with a fresh residual before accepting.
            m.apply_slice(&x, &mut ax);
            let true_res = sup(
                &rhs.values()
                    .iter()
                    .zip(&ax)
                    .map(|(f, a)| f - a)
                    .collect::<Vec<_>>(),
            );
            if true_res <= tol {
                return Field::from_values(op.grid(), x);
            }
            res = true_res;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: res,
        history,
    })
}

/// Smallest eigenpair of `op` by inverse power iteration, starting from the
/// constant vector. The eigenfunction is normalized to `max = 1` and must be
/// strictly positive.
pub fn principal_eigenpair(op: &NeumannOperator, tol: f64) -> Result<EigenPair> {
    let max_iter = 500;
    let inner_tol = (tol * 1e-2).max(1e-14);
    let mut x = Field::constant(op.grid(), 1.0);
    let mut lambda = 0.0;

    for it in 0..max_iter {
        let y = solve_linear(op, &x, inner_tol)?;
        // Rayleigh quotient at y.
        let ay = op.apply(&y);
        let num: f64 = y.values().iter().zip(ay.values()).map(|(a, b)| a * b).sum();
        let den: f64 = y.values().iter().map(|a| a * a).sum();
        lambda = num / den;

        // Sup-normalize with a positive orientation.
        let scale = y.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean: f64 = y.values().iter().sum::<f64>();
        let sign = if mean >= 0.0 { 1.0 } else { -1.0 };
        x = y.scale(sign / scale);

        let resid = op.apply(&x).sub(&x.scale(lambda)).sup_norm();
        if resid <= tol {
            let maxv = x.max();
            let phi1 = x.scale(1.0 / maxv);
            if phi1.min() <= 0.0 {
                return Err(Error::EigenSolve {
                    iterations: it + 1,
                    residual: resid,
                });
            }
            return Ok(EigenPair {
                lambda1: lambda,
                phi1,
                iterations: it + 1,
                residual: resid,
            });
        }
    }
    Err(Error::EigenSolve {
        iterations: max_iter,
        residual: op.apply(&x).sub(&x.scale(lambda)).sup_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_neumann_operator, build_grid, Field};
    use std::sync::Arc;

    fn op_1d(nodes: usize) -> NeumannOperator {
        let g = Arc::new(build_grid(1, &[1.0], &[nodes]).unwrap());
        assemble_neumann_operator(&g)
    }

    #[test]
    fn constant_rhs_solves_exactly() {
        let op = op_1d(11);
        for (rhs_val, expect) in [(1.0, 1.0), (1.5, 1.5), (0.01, 0.01)] {
            let rhs = Field::constant(op.grid(), rhs_val);
            let x = solve_linear(&op, &rhs, 1e-10).unwrap();
            assert!(x.sup_distance(&Field::constant(op.grid(), expect)) <= 1e-12);
        }
    }

    #[test]
    fn recovers_random_solution() {
        use rand::{Rng, SeedableRng};
        let op = op_1d(41);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let x0 = Field::from_values(
                op.grid(),
                (0..41).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let f = op.apply(&x0);
            let x = solve_linear(&op, &f, 1e-10).unwrap();
            assert!(x.sup_distance(&x0) <= 1e-9);
        }
    }

    #[test]
    fn nonconvergence_reports_history() {
        let op = op_1d(101);
        let g = op.grid().clone();
        let rhs = Field::from_fn(&g, |x| (7.0 * x[0]).sin());
        let err = solve_linear_with(&op, &rhs, 1e-13, 2).unwrap_err();
        match err {
            Error::LinearSolve { history, .. } => assert!(history.len() >= 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn neumann_eigenpair_is_one_and_constant() {
        for nodes in [11, 101] {
            let op = op_1d(nodes);
            let pair = principal_eigenpair(&op, 1e-10).unwrap();
            assert!((pair.lambda1 - 1.0).abs() <= 1e-10);
            assert!((pair.mu_bar() - 1.0).abs() <= 1e-12);
            assert!((pair.mu_underbar() - 1.0).abs() <= 1e-10);
            assert!(pair.phi1.min() > 0.0);
        }
        let g2 = Arc::new(build_grid(2, &[1.0, 1.0], &[9, 9]).unwrap());
        let op2 = assemble_neumann_operator(&g2);
        let pair = principal_eigenpair(&op2, 1e-10).unwrap();
        assert!((pair.lambda1 - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn perturbed_operator_matches_dense_oracle() {
        // A + diag(0.1 x) on [0,1]: lambda1 strictly inside (1, 1.1) with a
        // nonconstant positive eigenfunction. Oracle: dense symmetric
        // eigensolve of the same matrix.
        let op = op_1d(21);
        let g = op.grid().clone();
        let perturbed = op.with_added_diagonal(&Field::from_fn(&g, |x| 0.1 * x[0]));
        let pair = principal_eigenpair(&perturbed, 1e-10).unwrap();
        assert!(pair.lambda1 > 1.0 && pair.lambda1 < 1.1);
        assert!(pair.phi1.max() - pair.phi1.min() > 1e-3);
        assert!(pair.phi1.min() > 0.0);
        assert!((pair.phi1.max() - 1.0).abs() <= 1e-14);

        let dense = perturbed.matrix().to_dense();
        let eigen = dense.symmetric_eigen();
        let lambda_min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((pair.lambda1 - lambda_min).abs() <= 1e-8);
    }
}
