//! Constant-sign solutions: clamped Gauss-Seidel Picard iteration inside the
//! certified rectangle, negation by odd symmetry, and the strict separation
//! check against the lower rectangle field.

use crate::error::Result;
use crate::grid::{Field, NeumannOperator};
use crate::linear::{solve_linear, DEFAULT_LINEAR_TOL};
use crate::model::{system_residual, system_rhs, ProblemParams};
use crate::newton::{cap_slope, damped_newton, NewtonProblem};
use crate::subsup::SystemRectangle;

/// Discrete strictness threshold for the separation inequality.
pub const STRICTNESS_THRESHOLD: f64 = 1e-12;

/// A converged (or flagged) solution pair with its residual record.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub v: Field,
    pub residual_u: f64,
    pub residual_v: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
}

impl Solution {
    pub fn residual_sup(&self) -> f64 {
        self.residual_u.max(self.residual_v)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Tighten the converged iterate with a few unclamped Newton steps;
    /// the polished result is only kept if it stays in the rectangle.
    pub newton_polish: bool,
    pub linear_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 10_000,
            newton_polish: true,
            linear_tol: DEFAULT_LINEAR_TOL,
        }
    }
}

/// Solve for the positive solution inside `rect`, seeded at the rectangle
/// midpoint.
pub fn solve_positive(
    op: &NeumannOperator,
    params: &ProblemParams,
    rect: &SystemRectangle,
    opts: &SolveOptions,
) -> Result<Solution> {
    let seed_u = rect.u.midpoint();
    let seed_v = rect.v.midpoint();
    solve_positive_from(op, params, rect, &seed_u, &seed_v, opts)
}

/// Solve for the positive solution from an explicit seed (clamped into the
/// rectangle first).
///
/// One sweep solves the u-equation with the current v, clamps, then the
/// v-equation with the new u, clamps; the relaxation factor is halved
/// whenever the residual increases. Because the iterates stay inside the
/// rectangle, the singular denominator is bounded below by the positive
/// lower field throughout.
pub fn solve_positive_from(
    op: &NeumannOperator,
    params: &ProblemParams,
    rect: &SystemRectangle,
    seed_u: &Field,
    seed_v: &Field,
    opts: &SolveOptions,
) -> Result<Solution> {
    let clamp_u = |f: &Field| {
        f.zip(&rect.u.lower, |v, lo| v.max(lo))
            .zip(&rect.u.upper, |v, hi| v.min(hi))
    };
    let clamp_v = |f: &Field| {
        f.zip(&rect.v.lower, |v, lo| v.max(lo))
            .zip(&rect.v.upper, |v, hi| v.min(hi))
    };

    let mut u = clamp_u(seed_u);
    let mut v = clamp_v(seed_v);
    let mut omega: f64 = 1.0;
    let mut prev_res = f64::INFINITY;
    let mut history = Vec::new();

    for it in 0..opts.max_iter {
        let r = system_residual(op, params, &u, &v)?;
        let res = r.sup();
        history.push(res);
        if res <= opts.tol {
            let mut sol = Solution {
                u,
                v,
                residual_u: r.sup1,
                residual_v: r.sup2,
                iterations: it,
                converged: true,
                residual_history: history,
            };
            if opts.newton_polish {
                polish(op, params, rect, &mut sol, opts)?;
            }
            return Ok(sol);
        }
        if res > prev_res {
            omega = (omega * 0.5).max(1.0 / 1024.0);
        }
        prev_res = res;

        let (g1, _) = system_rhs(params, &u, &v)?;
        let u_half = solve_linear(op, &g1, opts.linear_tol)?;
        u = clamp_u(&u.zip(&u_half, |a, b| (1.0 - omega) * a + omega * b));

        let (_, g2) = system_rhs(params, &u, &v)?;
        let v_half = solve_linear(op, &g2, opts.linear_tol)?;
        v = clamp_v(&v.zip(&v_half, |a, b| (1.0 - omega) * a + omega * b));
    }

    let r = system_residual(op, params, &u, &v)?;
    history.push(r.sup());
    Ok(Solution {
        u,
        v,
        residual_u: r.sup1,
        residual_v: r.sup2,
        iterations: opts.max_iter,
        converged: false,
        residual_history: history,
    })
}

/// A few unclamped Newton steps on the coupled system; keep the result only
/// if it improves the residual and stays inside the rectangle.
fn polish(
    op: &NeumannOperator,
    params: &ProblemParams,
    rect: &SystemRectangle,
    sol: &mut Solution,
    opts: &SolveOptions,
) -> Result<()> {
    let p = *params;
    let rhs = move |u: &Field, v: &Field| system_rhs(&p, u, v);
    let jac = move |ui: f64, vi: f64| -> [f64; 4] {
        let pa = |s: f64, e: f64| s.abs().powf(e);
        let sgn = |s: f64| if s >= 0.0 { 1.0 } else { -1.0 };
        // d/ds |s|^e = e |s|^(e-1) sgn(s); the slope is frozen to 0 at the
        // kink and the sign factors of the coupling are piecewise constant.
        let d_pow = |s: f64, e: f64| {
            if e == 0.0 || s == 0.0 {
                0.0
            } else {
                e * pa(s, e - 1.0) * sgn(s)
            }
        };
        let s1 = p.f1_scale;
        let s2 = p.f2_scale;
        let dg1_du = cap_slope(s1 * sgn(vi) * d_pow(ui, p.alpha1) / pa(vi, p.beta1));
        let dg1_dv = cap_slope(-p.beta1 * s1 * pa(ui, p.alpha1) * pa(vi, -(p.beta1 + 1.0)));
        let dg2_du = cap_slope(s2 * sgn(ui) * d_pow(ui, p.alpha2) / pa(vi, p.beta2));
        let dg2_dv = cap_slope(
            -p.beta2 * s2 * sgn(ui) * pa(ui, p.alpha2) * sgn(vi) * pa(vi, -(p.beta2 + 1.0)),
        );
        [dg1_du, dg1_dv, dg2_du, dg2_dv]
    };
    let identity = |_i: usize, a: f64, b: f64| (a, b);
    let problem = NewtonProblem {
        op,
        rhs: &rhs,
        jac_diag: &jac,
        forcing: None,
        project: &identity,
    };
    let out = damped_newton(&problem, &sol.u, &sol.v, opts.tol * 1e-3, 8)?;
    let better = out.residual_u.max(out.residual_v) < sol.residual_sup();
    let contained = rect.u.contains(&out.u, 0.0) && rect.v.contains(&out.v, 0.0);
    if better && contained {
        sol.u = out.u;
        sol.v = out.v;
        sol.residual_u = out.residual_u;
        sol.residual_v = out.residual_v;
    }
    Ok(())
}

/// Negate a converged solution; the residual norms are recomputed and agree
/// with the original by the odd symmetry of the system.
pub fn negate(op: &NeumannOperator, params: &ProblemParams, sol: &Solution) -> Result<Solution> {
    let u = sol.u.negated();
    let v = sol.v.negated();
    let r = system_residual(op, params, &u, &v)?;
    Ok(Solution {
        u,
        v,
        residual_u: r.sup1,
        residual_v: r.sup2,
        iterations: sol.iterations,
        converged: sol.converged,
        residual_history: sol.residual_history.clone(),
    })
}

/// Strict separation of a positive solution from the lower rectangle field.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SeparationReport {
    pub margin_u: f64,
    pub margin_v: f64,
    pub worst_node_u: usize,
    pub threshold: f64,
    pub pass: bool,
    /// Containment in the full rectangle `[lower, upper]`.
    pub in_rectangle: bool,
    /// Containment in `[0, upper]`.
    pub in_positive_box: bool,
}

/// Report `min(u - z)` over nodes for a positive solution (mirror the inputs
/// for a negative one). Pass requires the margin to exceed the strictness
/// threshold at every node.
pub fn check_separation(
    sol: &Solution,
    rect: &SystemRectangle,
) -> SeparationReport {
    let mut margin_u = f64::INFINITY;
    let mut worst_node_u = 0;
    for (i, (&ui, &zi)) in sol
        .u
        .values()
        .iter()
        .zip(rect.u.lower.values())
        .enumerate()
    {
        if ui - zi < margin_u {
            margin_u = ui - zi;
            worst_node_u = i;
        }
    }
    let margin_v = sol
        .v
        .values()
        .iter()
        .zip(rect.v.lower.values())
        .map(|(&vi, &zi)| vi - zi)
        .fold(f64::INFINITY, f64::min);

    let in_rectangle = rect.u.contains(&sol.u, 0.0) && rect.v.contains(&sol.v, 0.0);
    let in_positive_box = sol.u.min() >= 0.0
        && sol.v.min() >= 0.0
        && sol
            .u
            .values()
            .iter()
            .zip(rect.u.upper.values())
            .all(|(&a, &b)| a <= b)
        && sol
            .v
            .values()
            .iter()
            .zip(rect.v.upper.values())
            .all(|(&a, &b)| a <= b);

    SeparationReport {
        margin_u,
        margin_v,
        worst_node_u,
        threshold: STRICTNESS_THRESHOLD,
        pass: margin_u > STRICTNESS_THRESHOLD,
        in_rectangle,
        in_positive_box,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_neumann_operator, build_grid};
    use crate::linear::principal_eigenpair;
    use crate::subsup::{choose_constants, Constants};
    use std::sync::Arc;

    fn setup(
        params: &ProblemParams,
        forced: Option<Constants>,
    ) -> (NeumannOperator, crate::subsup::CertifiedSetup) {
        let g = Arc::new(build_grid(1, &[1.0], &[21]).unwrap());
        let op = assemble_neumann_operator(&g);
        let eigen = principal_eigenpair(&op, 1e-10).unwrap();
        let setup = choose_constants(&op, &eigen, params, 1e-12, forced).unwrap();
        (op, setup)
    }

    /// Scalar oracle: the constant solution solves
    /// `t = s1 (t^a1 / w(t)^b1 + rho)` with `w(t) = (s2 t^a2)^(1/(1+b2))`,
    /// found by bisection.
    fn constant_solution_oracle(p: &ProblemParams) -> (f64, f64) {
        let w = |t: f64| (p.f2_scale * t.powf(p.alpha2)).powf(1.0 / (1.0 + p.beta2));
        let f = |t: f64| t - p.f1_scale * (t.powf(p.alpha1) / w(t).powf(p.beta1) + p.rho);
        let (mut lo, mut hi) = (1e-8, 1e6);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        (u, w(u))
    }

    #[test]
    fn converges_to_scalar_fixed_point() {
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.0, 2.0).unwrap();
        let (op, s) = setup(&p, None);
        let sol = solve_positive(&op, &p, &s.positive, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.residual_sup() <= 1e-8);
        // t^2 - t - 2 = 0 gives u = 4, then v = sqrt(4) = 2.
        let g = op.grid();
        assert!(sol.u.sup_distance(&Field::constant(g, 4.0)) <= 1e-7);
        assert!(sol.v.sup_distance(&Field::constant(g, 2.0)) <= 1e-7);

        let (u_oracle, v_oracle) = constant_solution_oracle(&p);
        assert!((u_oracle - 4.0).abs() <= 1e-8);
        assert!((v_oracle - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn seed_independence_on_constant_instance() {
        use rand::{Rng, SeedableRng};
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.0, 2.0).unwrap();
        let (op, s) = setup(&p, None);
        let g = op.grid().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let reference = solve_positive(&op, &p, &s.positive, &SolveOptions::default()).unwrap();
        for _ in 0..5 {
            let lo = s.positive.u.lower.values()[0];
            let hi = s.positive.u.upper.values()[0];
            let su = Field::constant(&g, rng.gen_range(lo..hi));
            let sv = Field::constant(&g, rng.gen_range(lo..hi));
            let sol =
                solve_positive_from(&op, &p, &s.positive, &su, &sv, &SolveOptions::default())
                    .unwrap();
            assert!(sol.converged);
            assert!(sol.u.sup_distance(&reference.u) <= 1e-7);
            assert!(sol.v.sup_distance(&reference.v) <= 1e-7);
        }
    }

    #[test]
    fn singular_denominator_instance_stays_in_rectangle() {
        let p = ProblemParams::new(0.3, 0.4, 0.0, 0.2, 0.25).unwrap();
        let (op, s) = setup(&p, None);
        let sol = solve_positive(&op, &p, &s.positive, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(s.positive.u.contains(&sol.u, 0.0));
        assert!(s.positive.v.contains(&sol.v, 0.0));
        assert!(sol.u.min() > s.positive.u.lower.max());
        assert!(sol.u.max() < s.positive.u.upper.min());
        assert!(sol.v.min() > 0.0);

        let (u_oracle, v_oracle) = constant_solution_oracle(&p);
        let g = op.grid();
        assert!(sol.u.sup_distance(&Field::constant(g, u_oracle)) <= 1e-7);
        assert!(sol.v.sup_distance(&Field::constant(g, v_oracle)) <= 1e-7);
    }

    #[test]
    fn negation_examples() {
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.0, 2.0).unwrap();
        let (op, s) = setup(&p, None);
        let sol = solve_positive(&op, &p, &s.positive, &SolveOptions::default()).unwrap();
        let neg = negate(&op, &p, &sol).unwrap();
        let g = op.grid();
        assert!(neg.u.sup_distance(&Field::constant(g, -4.0)) <= 1e-7);
        assert!(neg.residual_sup() <= 1e-8);
        assert!((neg.residual_u - sol.residual_u).abs() <= 1e-14);
        assert!((neg.residual_v - sol.residual_v).abs() <= 1e-14);
        let double = negate(&op, &p, &neg).unwrap();
        assert!(double.u.sup_distance(&sol.u) <= 1e-15);
    }

    #[test]
    fn separation_margin_values() {
        // rho = 2 admits the forced constant C = 4 (the eigenvalue floor is
        // 1/sqrt(2) < 4), giving z = 0.0625 and margin 4 - 0.0625.
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.0, 2.0).unwrap();
        let (op, s) = setup(&p, Some(Constants { c: 4.0, c0: 2.0 }));
        assert!(s.certificate.all_pass);
        let sol = solve_positive(&op, &p, &s.positive, &SolveOptions::default()).unwrap();
        let rep = check_separation(&sol, &s.positive);
        assert!(rep.pass);
        assert!((rep.margin_u - 3.9375).abs() <= 1e-6);
        assert!(rep.in_rectangle);
        assert!(rep.in_positive_box);

        // Negative solution vs the mirrored field: negate and reuse.
        let neg = negate(&op, &p, &sol).unwrap();
        let back = negate(&op, &p, &neg).unwrap();
        let rep_neg = check_separation(&back, &s.positive);
        assert!(rep_neg.pass);

        // A solution glued to the lower field fails with zero margin.
        let artificial = Solution {
            u: s.positive.u.lower.clone(),
            v: s.positive.v.lower.clone(),
            residual_u: 0.0,
            residual_v: 0.0,
            iterations: 0,
            converged: true,
            residual_history: vec![],
        };
        let rep0 = check_separation(&artificial, &s.positive);
        assert!(!rep0.pass);
        assert!(rep0.margin_u.abs() <= 1e-15);
    }
}
