//! Damped Newton iteration for the coupled discrete system, with a relaxed
//! Picard fallback and an optional nodewise projection of the iterates.
//!
//! The right-hand sides are nodewise maps, so the Jacobian is the block
//! operator matrix minus four diagonal blocks; at desk scale it is
//! assembled densely and factored per step.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::grid::{Field, NeumannOperator};

/// Nodewise derivative of the right-hand side pair:
/// `[dg1/du, dg1/dv, dg2/du, dg2/dv]` at one node.
pub(crate) type JacDiag<'a> = &'a dyn Fn(f64, f64) -> [f64; 4];

/// Nodewise right-hand side evaluation.
pub(crate) type RhsFn<'a> = &'a dyn Fn(&Field, &Field) -> Result<(Field, Field)>;

/// Nodewise projection of the iterate; identity when no box is enforced.
pub(crate) type ProjectFn<'a> = &'a dyn Fn(usize, f64, f64) -> (f64, f64);

pub(crate) struct NewtonProblem<'a> {
    pub op: &'a NeumannOperator,
    pub rhs: RhsFn<'a>,
    pub jac_diag: JacDiag<'a>,
    pub forcing: Option<&'a (Field, Field)>,
    pub project: ProjectFn<'a>,
}

pub(crate) struct NewtonOutcome {
    pub u: Field,
    pub v: Field,
    pub residual_u: f64,
    pub residual_v: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Slope cap: fractional powers have unbounded derivatives at the origin;
/// capping only changes the Newton direction, never the residual.
const SLOPE_CAP: f64 = 1e8;

pub(crate) fn cap_slope(s: f64) -> f64 {
    if !s.is_finite() {
        0.0
    } else {
        s.clamp(-SLOPE_CAP, SLOPE_CAP)
    }
}

impl<'a> NewtonProblem<'a> {
    fn residual(&self, u: &Field, v: &Field) -> Result<(Field, Field)> {
        let (mut g1, mut g2) = (self.rhs)(u, v)?;
        if let Some((c1, c2)) = self.forcing {
            g1 = g1.add(c1);
            g2 = g2.add(c2);
        }
        Ok((self.op.apply(u).sub(&g1), self.op.apply(v).sub(&g2)))
    }

    fn projected(&self, u: &Field, v: &Field) -> (Field, Field) {
        let n = u.len();
        let mut pu = Vec::with_capacity(n);
        let mut pv = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (self.project)(i, u.values()[i], v.values()[i]);
            pu.push(a);
            pv.push(b);
        }
        (
            Field::from_values(u.grid(), pu).expect("finite"),
            Field::from_values(v.grid(), pv).expect("finite"),
        )
    }
}

/// Run damped Newton from `(u0, v0)` until the sup-norm residual of the
/// forced system drops to `tol`, falling back to relaxed Picard steps
/// whenever the Newton direction fails to reduce the residual.
pub(crate) fn damped_newton(
    problem: &NewtonProblem,
    u0: &Field,
    v0: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome> {
    let n = problem.op.n();
    let dense_a = problem.op.matrix().to_dense();
    let a_lu = dense_a.clone().lu();

    let (mut u, mut v) = problem.projected(u0, v0);
    let (mut r1, mut r2) = problem.residual(&u, &v)?;
    let mut res = r1.sup_norm().max(r2.sup_norm());
    let mut history = vec![res];
    let mut omega: f64 = 1.0;
    let mut stagnation = 0usize;

    for it in 0..max_iter {
        if res <= tol {
            return Ok(NewtonOutcome {
                residual_u: r1.sup_norm(),
                residual_v: r2.sup_norm(),
                u,
                v,
                iterations: it,
                converged: true,
                history,
            });
        }

        // Assemble J = blockdiag(A, A) - nodewise derivative blocks.
        let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
        jac.view_mut((0, 0), (n, n)).copy_from(&dense_a);
        jac.view_mut((n, n), (n, n)).copy_from(&dense_a);
        for i in 0..n {
            let d = (problem.jac_diag)(u.values()[i], v.values()[i]);
            jac[(i, i)] -= cap_slope(d[0]);
            jac[(i, n + i)] -= cap_slope(d[1]);
            jac[(n + i, i)] -= cap_slope(d[2]);
            jac[(n + i, n + i)] -= cap_slope(d[3]);
        }
        let mut neg_r = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            neg_r[i] = -r1.values()[i];
            neg_r[n + i] = -r2.values()[i];
        }

        // Factor, with a diagonal shift retry if the factorization is
        // numerically singular.
        let mut step = jac.clone().lu().solve(&neg_r);
        let mut shift = 1e-8;
        while step.is_none() && shift <= 1.0 {
            let mut shifted = jac.clone();
            for i in 0..2 * n {
                shifted[(i, i)] += shift;
            }
            step = shifted.lu().solve(&neg_r);
            shift *= 100.0;
        }

        let mut accepted = false;
        if let Some(d) = step {
            if d.iter().all(|x| x.is_finite()) {
                let mut lambda = 1.0f64;
                while lambda >= 1.0 / 65536.0 {
                    let ut = Field::from_values(
                        u.grid(),
                        (0..n).map(|i| u.values()[i] + lambda * d[i]).collect(),
                    );
                    let vt = Field::from_values(
                        v.grid(),
                        (0..n).map(|i| v.values()[i] + lambda * d[n + i]).collect(),
                    );
                    if let (Ok(ut), Ok(vt)) = (ut, vt) {
                        let (put, pvt) = problem.projected(&ut, &vt);
                        if let Ok((t1, t2)) = problem.residual(&put, &pvt) {
                            let tres = t1.sup_norm().max(t2.sup_norm());
                            if tres < res {
                                u = put;
                                v = pvt;
                                r1 = t1;
                                r2 = t2;
                                res = tres;
                                accepted = true;
                                break;
                            }
                        }
                    }
                    lambda *= 0.5;
                }
            }
        }

        if !accepted {
            // Relaxed Picard fallback: x <- project((1-w) x + w A^{-1} g(x)).
            let (mut g1, mut g2) = (problem.rhs)(&u, &v)?;
            if let Some((c1, c2)) = problem.forcing {
                g1 = g1.add(c1);
                g2 = g2.add(c2);
            }
            let pu = a_lu
                .solve(&DVector::from_column_slice(g1.values()))
                .expect("operator is SPD");
            let pv = a_lu
                .solve(&DVector::from_column_slice(g2.values()))
                .expect("operator is SPD");
            let mut improved = false;
            while omega >= 1.0 / 1048576.0 {
                let ut = Field::from_values(
                    u.grid(),
                    (0..n)
                        .map(|i| (1.0 - omega) * u.values()[i] + omega * pu[i])
                        .collect(),
                )
                .expect("finite");
                let vt = Field::from_values(
                    v.grid(),
                    (0..n)
                        .map(|i| (1.0 - omega) * v.values()[i] + omega * pv[i])
                        .collect(),
                )
                .expect("finite");
                let (put, pvt) = problem.projected(&ut, &vt);
                let (t1, t2) = problem.residual(&put, &pvt)?;
                let tres = t1.sup_norm().max(t2.sup_norm());
                if tres < res {
                    u = put;
                    v = pvt;
                    r1 = t1;
                    r2 = t2;
                    res = tres;
                    improved = true;
                    break;
                }
                omega *= 0.5;
            }
            if !improved {
                stagnation += 1;
                if stagnation >= 3 {
                    history.push(res);
                    return Ok(NewtonOutcome {
                        residual_u: r1.sup_norm(),
                        residual_v: r2.sup_norm(),
                        u,
                        v,
                        iterations: it + 1,
                        converged: false,
                        history,
                    });
                }
            } else {
                stagnation = 0;
            }
        } else {
            stagnation = 0;
        }
        history.push(res);
    }

    Ok(NewtonOutcome {
        residual_u: r1.sup_norm(),
        residual_v: r2.sup_norm(),
        u,
        v,
        iterations: max_iter,
        converged: res <= tol,
        history,
    })
}
