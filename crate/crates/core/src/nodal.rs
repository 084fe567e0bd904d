//! The regularized system inside the small box `[-z, z] x [-z, z]`:
//! projected damped-Newton solves, continuation over a decreasing
//! regularization schedule, multistart classification and the sign-synchrony
//! and singular-mass diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, NeumannOperator};
use crate::linear::EigenPair;
use crate::model::{regularized_rhs, ProblemParams, TruncationEnv};
use crate::newton::{cap_slope, damped_newton, NewtonProblem};
use crate::sign_solver::Solution;
use crate::subsup::CertifiedSetup;

/// Strictly decreasing regularization sizes in (0,1).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContinuationSchedule {
    pub epsilons: Vec<f64>,
    pub step_tol: f64,
    pub warm_start: bool,
}

impl ContinuationSchedule {
    pub fn new(epsilons: Vec<f64>, step_tol: f64) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::EmptySchedule);
        }
        let ok = epsilons.iter().all(|&e| e > 0.0 && e < 1.0)
            && epsilons.windows(2).all(|w| w[1] < w[0]);
        if !ok {
            return Err(Error::BadSchedule);
        }
        Ok(ContinuationSchedule {
            epsilons,
            step_tol,
            warm_start: true,
        })
    }

    /// The default halving schedule 1/2, 1/4, ..., 1/64.
    pub fn default_halving() -> Self {
        ContinuationSchedule {
            epsilons: (1..=6).map(|k| 0.5f64.powi(k)).collect(),
            step_tol: 1e-8,
            warm_start: true,
        }
    }
}

/// Everything a regularized solve needs: operator, parameters, truncation
/// data and the small box (the lower rectangle fields of the certified
/// setup).
#[derive(Debug, Clone)]
pub struct NodalContext {
    pub op: NeumannOperator,
    pub params: ProblemParams,
    pub env: TruncationEnv,
    pub lower_u: Field,
    pub lower_v: Field,
    /// `C * ||y||_inf`, feeding the a-priori radius.
    cy_sup: f64,
}

impl NodalContext {
    pub fn new(
        op: &NeumannOperator,
        params: &ProblemParams,
        setup: &CertifiedSetup,
        eigen: &EigenPair,
        epsilon: f64,
        mu_chi: f64,
    ) -> Result<NodalContext> {
        params.require_beta1_zero()?;
        let ubar = setup.positive.u.upper.clone();
        let vbar = setup.positive.v.upper.clone();
        let cy_sup = ubar.sup_norm();
        let env = TruncationEnv::new(epsilon, ubar, vbar, eigen.phi1.clone(), mu_chi)?;
        Ok(NodalContext {
            op: op.clone(),
            params: *params,
            env,
            lower_u: setup.positive.u.lower.clone(),
            lower_v: setup.positive.v.lower.clone(),
            cy_sup,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<NodalContext> {
        let mut ctx = self.clone();
        ctx.env = self.env.with_epsilon(epsilon)?;
        Ok(ctx)
    }

    /// Computable a-priori radius dominating all truncated right-hand
    /// sides: `2 (3 eps / 2 + C ||y||_inf + rho + 1)`.
    pub fn a_priori_radius(&self) -> f64 {
        2.0 * (1.5 * self.env.epsilon + self.cy_sup + self.params.rho + 1.0)
    }

    /// Is `(u, v)` inside the small box nodewise?
    pub fn in_box(&self, u: &Field, v: &Field, slack: f64) -> bool {
        u.values()
            .iter()
            .zip(self.lower_u.values())
            .all(|(&a, &b)| a.abs() <= b + slack)
            && v.values()
                .iter()
                .zip(self.lower_v.values())
                .all(|(&a, &b)| a.abs() <= b + slack)
    }

    /// L2 pair norm `sqrt(int u^2 + int v^2)` against the a-priori radius.
    pub fn ball_norm(&self, u: &Field, v: &Field) -> f64 {
        (integrate(&u.map(|s| s * s)) + integrate(&v.map(|s| s * s))).sqrt()
    }
}

/// Solve the regularized system from `(seed_u, seed_v)` with iterates
/// projected into the small box; an optional additive forcing turns this
/// into the manufactured-solution solver.
pub fn solve_regularized(
    ctx: &NodalContext,
    seed_u: &Field,
    seed_v: &Field,
    forcing: Option<&(Field, Field)>,
    tol: f64,
    max_iter: usize,
) -> Result<Solution> {
    let p = ctx.params;
    let eps = ctx.env.epsilon;
    let rhs = move |u: &Field, v: &Field| regularized_rhs(&p, eps, u, v);
    let jac = move |ui: f64, vi: f64| -> [f64; 4] {
        let pa = |s: f64, e: f64| s.abs().powf(e);
        let sgn = |s: f64| if s >= 0.0 { 1.0 } else { -1.0 };
        let d_pow = |s: f64, e: f64| {
            if e == 0.0 || s == 0.0 {
                0.0
            } else {
                e * pa(s, e - 1.0) * sgn(s)
            }
        };
        let den = vi + eps * (0.5 + sgn(vi));
        let dg1_du = cap_slope(p.f1_scale * sgn(vi) * d_pow(ui, p.alpha1));
        let dg2_du = cap_slope(p.f2_scale * sgn(ui) * d_pow(ui, p.alpha2) / pa(den, p.beta2));
        let dg2_dv = cap_slope(
            -p.beta2 * p.f2_scale * sgn(ui) * pa(ui, p.alpha2) * sgn(den)
                * pa(den, -(p.beta2 + 1.0)),
        );
        [dg1_du, 0.0, dg2_du, dg2_dv]
    };
    let lower_u = ctx.lower_u.clone();
    let lower_v = ctx.lower_v.clone();
    let project = move |i: usize, a: f64, b: f64| -> (f64, f64) {
        let bu = lower_u.values()[i];
        let bv = lower_v.values()[i];
        (a.clamp(-bu, bu), b.clamp(-bv, bv))
    };
    let problem = NewtonProblem {
        op: &ctx.op,
        rhs: &rhs,
        jac_diag: &jac,
        forcing,
        project: &project,
    };
    let out = damped_newton(&problem, seed_u, seed_v, tol, max_iter)?;

    // Denominator safety along the result: |v + shift| >= eps/2.
    debug_assert!(out
        .v
        .values()
        .iter()
        .all(|&vi| (vi + eps * (0.5 + if vi >= 0.0 { 1.0 } else { -1.0 })).abs() >= 0.5 * eps));

    Ok(Solution {
        u: out.u,
        v: out.v,
        residual_u: out.residual_u,
        residual_v: out.residual_v,
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.history,
    })
}

/// One step of the continuation record.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ContinuationStep {
    pub epsilon: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sup distance to the previous step's pair; the discrete stand-in for
    /// the convergence of the regularized family.
    pub step_distance: Option<f64>,
}

/// Final pair of a continuation run with its per-step record.
#[derive(Debug, Clone)]
pub struct NodalCandidate {
    pub u_star: Field,
    pub v_star: Field,
    pub steps: Vec<ContinuationStep>,
    pub complete: bool,
    pub failed_epsilon: Option<f64>,
}

/// Warm-started chain of regularized solves over the schedule. If a step
/// fails it is retried from up to three of the most recent converged pairs;
/// an unrecovered failure flags the candidate incomplete.
pub fn continuation(
    ctx: &NodalContext,
    schedule: &ContinuationSchedule,
    seed_u: &Field,
    seed_v: &Field,
    forcing: Option<&(Field, Field)>,
    max_iter: usize,
) -> Result<NodalCandidate> {
    if schedule.epsilons.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut steps = Vec::new();
    let mut archive: Vec<(Field, Field)> = Vec::new();
    let mut current = (seed_u.clone(), seed_v.clone());
    let mut complete = true;
    let mut failed_epsilon = None;

    for &eps in &schedule.epsilons {
        let step_ctx = ctx.with_epsilon(eps)?;
        let seed = if schedule.warm_start || archive.is_empty() {
            current.clone()
        } else {
            (seed_u.clone(), seed_v.clone())
        };
        let mut sol = solve_regularized(&step_ctx, &seed.0, &seed.1, forcing, schedule.step_tol, max_iter)?;
        if !sol.converged {
            for (au, av) in archive.iter().rev().take(3) {
                let retry = solve_regularized(&step_ctx, au, av, forcing, schedule.step_tol, max_iter)?;
                if retry.converged {
                    sol = retry;
                    break;
                }
            }
        }
        let distance = archive
            .last()
            .map(|(au, av)| sol.u.sup_distance(au).max(sol.v.sup_distance(av)));
        steps.push(ContinuationStep {
            epsilon: eps,
            residual_u: sol.residual_u,
            residual_v: sol.residual_v,
            iterations: sol.iterations,
            converged: sol.converged,
            step_distance: distance,
        });
        if !sol.converged {
            complete = false;
            failed_epsilon = Some(eps);
            current = (sol.u, sol.v);
            break;
        }
        current = (sol.u.clone(), sol.v.clone());
        archive.push((sol.u, sol.v));
    }

    Ok(NodalCandidate {
        u_star: current.0,
        v_star: current.1,
        steps,
        complete,
        failed_epsilon,
    })
}

/// Classification of a converged pair by its sign structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionClass {
    Positive,
    Negative,
    NodalSynchronized,
    Other,
}

/// Sign diagnostics of a candidate pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SynchronyReport {
    pub min_product: f64,
    pub fraction_u_positive: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub u_changes_sign: bool,
    pub v_changes_sign: bool,
    pub nontrivial: bool,
    pub pass: bool,
    pub tol: f64,
}

/// Report the minimum of `u v` over nodes, the sign-change flags (a
/// component changes sign when it attains values below `-10 tol` and above
/// `+10 tol`) and the nontriviality of both components. Pass requires
/// `min(u v) >= -tol` and both sup norms above `tol`; an anti-synchronized
/// pair must never pass.
pub fn sign_synchrony_report(u: &Field, v: &Field, tol: f64) -> SynchronyReport {
    let min_product = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a * b)
        .fold(f64::INFINITY, f64::min);
    let n = u.len() as f64;
    let fraction_u_positive = u.values().iter().filter(|&&a| a > 0.0).count() as f64 / n;
    let sup_u = u.sup_norm();
    let sup_v = v.sup_norm();
    let changes = |f: &Field| f.min() < -10.0 * tol && f.max() > 10.0 * tol;
    let u_changes_sign = changes(u);
    let v_changes_sign = changes(v);
    let nontrivial = sup_u > tol && sup_v > tol;
    SynchronyReport {
        min_product,
        fraction_u_positive,
        sup_u,
        sup_v,
        u_changes_sign,
        v_changes_sign,
        nontrivial,
        pass: min_product >= -tol && nontrivial,
        tol,
    }
}

pub fn classify(u: &Field, v: &Field, tol: f64) -> SolutionClass {
    let t = 10.0 * tol;
    if u.min() > t && v.min() > t {
        return SolutionClass::Positive;
    }
    if u.max() < -t && v.max() < -t {
        return SolutionClass::Negative;
    }
    let rep = sign_synchrony_report(u, v, tol);
    if rep.u_changes_sign && rep.v_changes_sign && rep.min_product >= -tol {
        return SolutionClass::NodalSynchronized;
    }
    SolutionClass::Other
}

/// Discrete mass of the regularized second right-hand side on the small-v
/// sets: for each `mu`, the quadrature of `|g2|` over nodes with
/// `|v| <= mu`. Shrinking `mu` can only shrink the mass.
pub fn singular_mass_diagnostic(
    ctx: &NodalContext,
    u: &Field,
    v: &Field,
    mu_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let (_, g2) = regularized_rhs(&ctx.params, ctx.env.epsilon, u, v)?;
    let weights = u.grid().quad_weights();
    let mut out = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        let mass: f64 = (0..u.len())
            .filter(|&i| v.values()[i].abs() <= mu)
            .map(|i| weights[i] * g2.values()[i].abs())
            .sum();
        out.push((mu, mass));
    }
    Ok(out)
}

/// Deterministic multistart seeds: scaled synchronized / anti-synchronized
/// cosine modes, small constants, then seeded random fields in the box.
pub fn multistart_seeds(ctx: &NodalContext, n_starts: usize, rng_seed: u64) -> Vec<(Field, Field)> {
    let grid = ctx.op.grid();
    let extents: Vec<f64> = grid.axes().iter().map(|a| a.extent).collect();
    let pi = std::f64::consts::PI;
    let mode = |k: f64| {
        Field::from_fn(grid, |x| {
            let mut m = 1.0;
            for (c, l) in x.iter().zip(&extents) {
                m *= (k * pi * c / l).cos();
            }
            m
        })
    };
    let half_u = ctx.lower_u.scale(0.5);
    let half_v = ctx.lower_v.scale(0.5);
    let scaled = |m: &Field, b: &Field| m.zip(b, |mi, bi| mi * bi);

    let m1 = mode(1.0);
    let m2 = mode(2.0);
    let mut seeds: Vec<(Field, Field)> = vec![
        (scaled(&m1, &half_u), scaled(&m1, &half_v)),
        (scaled(&m1, &half_u).negated(), scaled(&m1, &half_v).negated()),
        (scaled(&m2, &half_u), scaled(&m2, &half_v)),
        (scaled(&m2, &half_u).negated(), scaled(&m2, &half_v).negated()),
        (half_u.clone(), half_v.clone()),
        (half_u.negated(), half_v.negated()),
        (scaled(&m1, &half_u), scaled(&m1, &half_v).negated()),
        (scaled(&m1, &half_u).negated(), scaled(&m1, &half_v)),
    ];
    seeds.truncate(n_starts);

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    while seeds.len() < n_starts {
        let u = Field::from_values(
            grid,
            ctx.lower_u
                .values()
                .iter()
                .map(|&b| rng.gen_range(-b..b))
                .collect(),
        )
        .expect("finite");
        let v = Field::from_values(
            grid,
            ctx.lower_v
                .values()
                .iter()
                .map(|&b| rng.gen_range(-b..b))
                .collect(),
        )
        .expect("finite");
        seeds.push((u, v));
    }
    seeds
}

/// One multistart branch: where it started, what it converged to.
#[derive(Debug, Clone)]
pub struct ClassifiedSolution {
    pub seed_id: usize,
    pub class: SolutionClass,
    pub solution: Solution,
}

/// Run the multistart at the context's regularization size and keep every
/// distinct converged solution (sup distance above `100 tol`), in seed-id
/// order.
pub fn multistart_regularized(
    ctx: &NodalContext,
    n_starts: usize,
    rng_seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<ClassifiedSolution>> {
    let mut kept: Vec<ClassifiedSolution> = Vec::new();
    for (seed_id, (su, sv)) in multistart_seeds(ctx, n_starts, rng_seed).iter().enumerate() {
        let sol = solve_regularized(ctx, su, sv, None, tol, max_iter)?;
        if !sol.converged {
            continue;
        }
        let distinct = kept.iter().all(|k| {
            k.solution.u.sup_distance(&sol.u).max(k.solution.v.sup_distance(&sol.v))
                > 100.0 * tol
        });
        if distinct {
            let class = classify(&sol.u, &sol.v, tol);
            kept.push(ClassifiedSolution {
                seed_id,
                class,
                solution: sol,
            });
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_neumann_operator, build_grid};
    use crate::linear::principal_eigenpair;
    use crate::model::manufactured_forcing_regularized;
    use crate::subsup::choose_constants;
    use std::sync::Arc;

    fn context(params: &ProblemParams, nodes: usize, epsilon: f64) -> NodalContext {
        let g = Arc::new(build_grid(1, &[1.0], &[nodes]).unwrap());
        let op = assemble_neumann_operator(&g);
        let eigen = principal_eigenpair(&op, 1e-10).unwrap();
        let setup = choose_constants(&op, &eigen, params, 1e-12, None).unwrap();
        NodalContext::new(&op, params, &setup, &eigen, epsilon, 0.1).unwrap()
    }

    fn nodal_pair(ctx: &NodalContext) -> (Field, Field) {
        let g = ctx.op.grid();
        let pi = std::f64::consts::PI;
        let u = Field::from_fn(g, |x| (pi * x[0]).cos()).zip(&ctx.lower_u, |m, b| 0.5 * b * m);
        (u.clone(), u)
    }

    fn perturbed(f: &Field, rel: f64, rng: &mut ChaCha8Rng) -> Field {
        Field::from_values(
            f.grid(),
            f.values()
                .iter()
                .map(|&v| v * (1.0 + rel * rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn manufactured_recovery_fixed_eps() {
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.25, 2.0).unwrap();
        let ctx = context(&p, 101, 0.5);
        let (u_star, v_star) = nodal_pair(&ctx);
        let forcing =
            manufactured_forcing_regularized(&ctx.op, &p, 0.5, &u_star, &v_star).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let su = perturbed(&u_star, 0.1, &mut rng);
        let sv = perturbed(&v_star, 0.1, &mut rng);
        let sol = solve_regularized(&ctx, &su, &sv, Some(&forcing), 1e-9, 200).unwrap();
        assert!(sol.converged);
        assert!(sol.u.sup_distance(&u_star) <= 1e-6);
        assert!(sol.v.sup_distance(&v_star) <= 1e-6);
        assert!(ctx.in_box(&sol.u, &sol.v, 1e-12));
    }

    #[test]
    fn continuation_with_fixed_forcing() {
        // With beta2 = 0 the regularized right-hand side is independent of
        // eps, so one forcing makes the manufactured pair exact at every
        // step of the schedule.
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.0, 2.0).unwrap();
        let ctx = context(&p, 101, 0.5);
        let (u_star, v_star) = nodal_pair(&ctx);
        let forcing =
            manufactured_forcing_regularized(&ctx.op, &p, 0.5, &u_star, &v_star).unwrap();
        let schedule = ContinuationSchedule::new(vec![0.5, 0.25, 0.125], 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let su = perturbed(&u_star, 0.1, &mut rng);
        let sv = perturbed(&v_star, 0.1, &mut rng);
        let cand = continuation(&ctx, &schedule, &su, &sv, Some(&forcing), 200).unwrap();
        assert!(cand.complete);
        assert_eq!(cand.steps.len(), 3);
        assert!(cand.u_star.sup_distance(&u_star) <= 1e-6);
        assert!(cand.v_star.sup_distance(&v_star) <= 1e-6);
        for s in &cand.steps[1..] {
            assert!(s.step_distance.unwrap().is_finite());
        }
        let rep = sign_synchrony_report(&cand.u_star, &cand.v_star, 1e-9);
        assert!(rep.pass && rep.u_changes_sign && rep.v_changes_sign);
    }

    #[test]
    fn schedule_validation() {
        assert!(matches!(
            ContinuationSchedule::new(vec![], 1e-8),
            Err(Error::EmptySchedule)
        ));
        assert!(ContinuationSchedule::new(vec![0.5, 0.5], 1e-8).is_err());
        assert!(ContinuationSchedule::new(vec![0.25, 0.5], 1e-8).is_err());
        assert!(ContinuationSchedule::new(vec![1.5, 0.5], 1e-8).is_err());
    }

    #[test]
    fn synchrony_examples() {
        let g = Arc::new(build_grid(1, &[1.0], &[41]).unwrap());
        let pi = std::f64::consts::PI;
        let c = Field::from_fn(&g, |x| (pi * x[0]).cos());
        let rep = sign_synchrony_report(&c, &c, 1e-9);
        assert!(rep.pass && rep.min_product >= 0.0);
        assert!(rep.u_changes_sign && rep.v_changes_sign);

        let rep = sign_synchrony_report(&c, &c.negated(), 1e-9);
        assert!(!rep.pass && rep.min_product < 0.0);

        let zero = Field::constant(&g, 0.0);
        let rep = sign_synchrony_report(&zero, &c, 1e-9);
        assert!(!rep.pass && !rep.nontrivial);
    }

    #[test]
    fn classification_thresholds() {
        let g = Arc::new(build_grid(1, &[1.0], &[11]).unwrap());
        let tol = 1e-9;
        let pos = Field::constant(&g, 1.0);
        assert_eq!(classify(&pos, &pos, tol), SolutionClass::Positive);
        assert_eq!(
            classify(&pos.negated(), &pos.negated(), tol),
            SolutionClass::Negative
        );
        let pi = std::f64::consts::PI;
        let c = Field::from_fn(&g, |x| (pi * x[0]).cos());
        assert_eq!(classify(&c, &c, tol), SolutionClass::NodalSynchronized);
        assert_eq!(classify(&c, &c.negated(), tol), SolutionClass::Other);
    }

    #[test]
    fn singular_mass_examples() {
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.25, 2.0).unwrap();
        let ctx = context(&p, 41, 0.5);
        let g = ctx.op.grid();

        // v bounded away from zero: the small set is empty.
        let u = Field::constant(g, 0.1);
        let v = Field::constant(g, 0.2);
        let out = singular_mass_diagnostic(&ctx, &u, &v, &[0.1]).unwrap();
        assert_eq!(out[0].1, 0.0);

        // mu above sup|v|: the full integral of |g2|.
        let out = singular_mass_diagnostic(&ctx, &u, &v, &[0.5]).unwrap();
        let (_, g2) = regularized_rhs(&p, 0.5, &u, &v).unwrap();
        let full = integrate(&g2.map(f64::abs));
        assert!((out[0].1 - full).abs() <= 1e-12);

        // Monotone in mu on a sign-changing pair.
        let (u_star, v_star) = nodal_pair(&ctx);
        let out = singular_mass_diagnostic(&ctx, &u_star, &v_star, &[0.1, 0.01, 0.001]).unwrap();
        assert!(out[0].1 >= out[1].1 && out[1].1 >= out[2].1);
    }

    #[test]
    fn no_positive_pair_survives_in_small_box() {
        // Summing the first equation over nodes shows a both-positive pair
        // inside the small box is impossible: the mean of u would have to
        // reach rho, which exceeds the box bound C^-2. The solver must
        // never report one.
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.25, 2.0).unwrap();
        let ctx = context(&p, 21, 0.5);
        let su = ctx.lower_u.scale(0.5);
        let sv = ctx.lower_v.scale(0.5);
        let sol = solve_regularized(&ctx, &su, &sv, None, 1e-8, 150).unwrap();
        assert!(ctx.in_box(&sol.u, &sol.v, 1e-12));
        if sol.converged {
            assert!(classify(&sol.u, &sol.v, 1e-8) != SolutionClass::Positive);
        }
    }

    #[test]
    fn multistart_is_deterministic() {
        let p = ProblemParams::new(0.5, 0.5, 0.0, 0.25, 2.0).unwrap();
        let ctx = context(&p, 21, 0.5);
        let a = multistart_regularized(&ctx, 10, 42, 1e-8, 100).unwrap();
        let b = multistart_regularized(&ctx, 10, 42, 1e-8, 100).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed_id, y.seed_id);
            assert_eq!(x.class, y.class);
            assert_eq!(x.solution.u.values(), y.solution.u.values());
        }
    }
}
