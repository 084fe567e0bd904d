//! Batch commands: each one reads a `RunConfig`, runs its pipeline, and
//! writes `report.json` plus CSV fields into the output directory.
//!
//! Exit codes: 0 all checks pass, 1 config error, 2 solver failure,
//! 3 checks ran but an asserted property failed. Reports carry no wall-clock
//! data, and all randomness derives from the config seed, so re-running a
//! command reproduces its outputs byte for byte.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::config::{CommandKind, RunConfig};
use crate::degree::{
    check_no_solution_t0, estimate_degree, homotopy_sweep, CompactMap, DegreeEstimate, Domain,
    FlatBox, HomotopyKind, NoSolutionWitness, SweepTrace,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, NeumannOperator};
use crate::linear::{principal_eigenpair, EigenPair};
use crate::model::ProblemParams;
use crate::nodal::{
    classify, continuation, multistart_regularized, sign_synchrony_report, singular_mass_diagnostic,
    ContinuationSchedule, ContinuationStep, NodalContext, SolutionClass, SynchronyReport,
};
use crate::sign_solver::{check_separation, negate, solve_positive, SeparationReport, SolveOptions};
use crate::subsup::{choose_constants, Certificate, CertifiedSetup};
use crate::{assemble_neumann_operator, grid};

#[derive(Debug, serde::Serialize)]
pub struct GridMeta {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub nodes: Vec<usize>,
    pub node_count: usize,
}

impl GridMeta {
    fn of(grid: &Grid) -> GridMeta {
        GridMeta {
            dim: grid.dim(),
            extents: grid.axes().iter().map(|a| a.extent).collect(),
            nodes: grid.axes().iter().map(|a| a.nodes).collect(),
            node_count: grid.node_count(),
        }
    }
}

#[derive(Debug, serde::Serialize)]
pub struct EigenReport {
    pub command: String,
    pub grid: GridMeta,
    pub lambda1: f64,
    pub mu_bar: f64,
    pub mu_underbar: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, serde::Serialize)]
pub struct CertifyReport {
    pub command: String,
    pub grid: GridMeta,
    pub params: ProblemParams,
    pub doublings: u32,
    pub forced_constants: bool,
    pub certificate: Certificate,
    pub all_pass: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct SolutionSummary {
    pub converged: bool,
    pub iterations: usize,
    pub residual_u: f64,
    pub residual_v: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
}

impl SolutionSummary {
    fn of(sol: &crate::sign_solver::Solution) -> SolutionSummary {
        SolutionSummary {
            converged: sol.converged,
            iterations: sol.iterations,
            residual_u: sol.residual_u,
            residual_v: sol.residual_v,
            min_u: sol.u.min(),
            max_u: sol.u.max(),
            min_v: sol.v.min(),
            max_v: sol.v.max(),
        }
    }
}

#[derive(Debug, serde::Serialize)]
pub struct SignReport {
    pub command: String,
    pub grid: GridMeta,
    pub params: ProblemParams,
    pub certificate: Certificate,
    pub positive: SolutionSummary,
    pub negative: SolutionSummary,
    pub separation_positive: SeparationReport,
    pub separation_negative: SeparationReport,
    pub odd_symmetry_residual_gap: f64,
    pub all_pass: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct BranchReport {
    pub seed_id: usize,
    pub initial_class: SolutionClass,
    pub final_class: SolutionClass,
    pub complete: bool,
    pub failed_epsilon: Option<f64>,
    pub steps: Vec<ContinuationStep>,
    pub ball_norm: f64,
    pub a_priori_radius: f64,
    pub ball_constraint_binds: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct NodalReport {
    pub command: String,
    pub grid: GridMeta,
    pub params: ProblemParams,
    pub epsilons: Vec<f64>,
    pub n_starts: usize,
    pub seed: u64,
    pub branches: Vec<BranchReport>,
    pub nodal_branch_found: bool,
    pub chosen_seed_id: Option<usize>,
    pub synchrony: Option<SynchronyReport>,
    pub mass_diagnostic: Vec<MassPoint>,
    pub no_constant_sign_in_box: bool,
    pub all_pass: bool,
}

#[derive(Debug, serde::Serialize)]
pub struct MassPoint {
    pub mu: f64,
    pub mass: f64,
}

#[derive(Debug, serde::Serialize)]
pub struct AdditivityReport {
    pub full: Option<i64>,
    pub punctured: Option<i64>,
    pub inner: Option<i64>,
    pub consistent: Option<bool>,
    pub note: String,
}

#[derive(Debug, serde::Serialize)]
pub struct DegreeReport {
    pub command: String,
    pub grid: GridMeta,
    pub params: ProblemParams,
    pub no_solution_t0: NoSolutionWitness,
    pub h0_estimate: DegreeEstimate,
    pub h_sweep: SweepTrace,
    pub n0_estimate: Option<DegreeEstimate>,
    pub n0_error: Option<String>,
    pub n_sweep: SweepTrace,
    pub additivity: AdditivityReport,
    pub checks: BTreeMap<String, bool>,
    pub all_pass: bool,
}

struct Prepared {
    grid: Arc<Grid>,
    op: NeumannOperator,
    eigen: EigenPair,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let grid = Arc::new(config.grid.build()?);
    let op = assemble_neumann_operator(&grid);
    let eigen = principal_eigenpair(&op, config.solver.linear_tol)?;
    Ok(Prepared { grid, op, eigen })
}

fn certified(config: &RunConfig, prep: &Prepared) -> Result<CertifiedSetup> {
    choose_constants(
        &prep.op,
        &prep.eigen,
        &config.params,
        config.solver.linear_tol,
        config.forced_constants,
    )
}

pub fn cmd_eigen(config: &RunConfig) -> Result<(EigenReport, Vec<(String, Field)>)> {
    let prep = prepare(config)?;
    let report = EigenReport {
        command: "eigen".into(),
        grid: GridMeta::of(&prep.grid),
        lambda1: prep.eigen.lambda1,
        mu_bar: prep.eigen.mu_bar(),
        mu_underbar: prep.eigen.mu_underbar(),
        iterations: prep.eigen.iterations,
        residual: prep.eigen.residual,
    };
    let fields = vec![("phi1".to_string(), prep.eigen.phi1.clone())];
    Ok((report, fields))
}

pub fn cmd_certify(config: &RunConfig) -> Result<(CertifyReport, Vec<(String, Field)>)> {
    let prep = prepare(config)?;
    let setup = certified(config, &prep)?;
    let all_pass = setup.certificate.all_pass;
    let report = CertifyReport {
        command: "certify".into(),
        grid: GridMeta::of(&prep.grid),
        params: config.params,
        doublings: setup.doublings,
        forced_constants: config.forced_constants.is_some(),
        certificate: setup.certificate.clone(),
        all_pass,
    };
    let fields = vec![
        ("w".to_string(), setup.aux.w.clone()),
        ("y".to_string(), setup.aux.y.clone()),
        ("z".to_string(), setup.aux.z.clone()),
        ("u_upper".to_string(), setup.positive.u.upper.clone()),
    ];
    Ok((report, fields))
}

pub fn cmd_solve_sign(config: &RunConfig) -> Result<(SignReport, Vec<(String, Field)>)> {
    let prep = prepare(config)?;
    let setup = certified(config, &prep)?;
    let opts = SolveOptions {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        newton_polish: config.solver.newton_polish,
        linear_tol: config.solver.linear_tol,
    };
    let positive = solve_positive(&prep.op, &config.params, &setup.positive, &opts)?;
    let negative = negate(&prep.op, &config.params, &positive)?;

    let sep_pos = check_separation(&positive, &setup.positive);
    // The mirrored check: negate the negative solution back and compare
    // against the same lower field.
    let mirrored = negate(&prep.op, &config.params, &negative)?;
    let sep_neg = check_separation(&mirrored, &setup.positive);

    let odd_gap = (positive.residual_u - negative.residual_u)
        .abs()
        .max((positive.residual_v - negative.residual_v).abs());

    let all_pass = setup.certificate.all_pass
        && positive.converged
        && sep_pos.pass
        && sep_neg.pass
        && odd_gap <= 1e-13;
    let report = SignReport {
        command: "solve-sign".into(),
        grid: GridMeta::of(&prep.grid),
        params: config.params,
        certificate: setup.certificate.clone(),
        positive: SolutionSummary::of(&positive),
        negative: SolutionSummary::of(&negative),
        separation_positive: sep_pos,
        separation_negative: sep_neg,
        odd_symmetry_residual_gap: odd_gap,
        all_pass,
    };
    let fields = vec![
        ("u_plus".to_string(), positive.u.clone()),
        ("v_plus".to_string(), positive.v.clone()),
        ("u_minus".to_string(), negative.u.clone()),
        ("v_minus".to_string(), negative.v.clone()),
    ];
    Ok((report, fields))
}

pub fn cmd_solve_nodal(config: &RunConfig) -> Result<(NodalReport, Vec<(String, Field)>)> {
    let prep = prepare(config)?;
    let setup = certified(config, &prep)?;
    let schedule = ContinuationSchedule::new(
        config.continuation.epsilons.clone(),
        config.continuation.step_tol,
    )?;
    let eps0 = schedule.epsilons[0];
    let ctx = NodalContext::new(
        &prep.op,
        &config.params,
        &setup,
        &prep.eigen,
        eps0,
        config.continuation.mu_chi,
    )?;

    log::info!(
        "nodal multistart: {} seeds at epsilon = {eps0}",
        config.multistart.n_starts
    );
    let initial = multistart_regularized(
        &ctx,
        config.multistart.n_starts,
        config.multistart.seed,
        config.solver.tol,
        config.solver.nodal_max_iter,
    )?;

    let mut branches = Vec::new();
    let mut candidates = Vec::new();
    for branch in &initial {
        let cand = continuation(
            &ctx,
            &schedule,
            &branch.solution.u,
            &branch.solution.v,
            None,
            config.solver.nodal_max_iter,
        )?;
        let final_class = classify(&cand.u_star, &cand.v_star, config.solver.tol);
        let final_eps = cand
            .steps
            .last()
            .map(|s| s.epsilon)
            .unwrap_or(eps0);
        let final_ctx = ctx.with_epsilon(final_eps)?;
        let ball_norm = final_ctx.ball_norm(&cand.u_star, &cand.v_star);
        let radius = final_ctx.a_priori_radius();
        branches.push(BranchReport {
            seed_id: branch.seed_id,
            initial_class: branch.class,
            final_class,
            complete: cand.complete,
            failed_epsilon: cand.failed_epsilon,
            steps: cand.steps.clone(),
            ball_norm,
            a_priori_radius: radius,
            ball_constraint_binds: ball_norm >= radius,
        });
        candidates.push((branch.seed_id, final_class, cand));
    }

    let chosen = candidates
        .iter()
        .position(|(_, class, cand)| *class == SolutionClass::NodalSynchronized && cand.complete);
    let nodal_branch_found = chosen.is_some();

    // A converged constant-sign pair inside the small box would contradict
    // the separation property; the classifier must never produce one.
    let no_constant_sign_in_box = candidates.iter().all(|(_, class, _)| {
        !matches!(class, SolutionClass::Positive | SolutionClass::Negative)
    });

    let mut synchrony = None;
    let mut mass = Vec::new();
    let mut fields = Vec::new();
    let mut chosen_seed_id = None;
    if let Some(idx) = chosen {
        let (seed_id, _, cand) = &candidates[idx];
        chosen_seed_id = Some(*seed_id);
        synchrony = Some(sign_synchrony_report(
            &cand.u_star,
            &cand.v_star,
            config.solver.tol,
        ));
        let final_eps = cand.steps.last().map(|s| s.epsilon).unwrap_or(eps0);
        let final_ctx = ctx.with_epsilon(final_eps)?;
        mass = singular_mass_diagnostic(
            &final_ctx,
            &cand.u_star,
            &cand.v_star,
            &config.continuation.mu_list,
        )?
        .into_iter()
        .map(|(mu, mass)| MassPoint { mu, mass })
        .collect();
        fields.push(("u_star".to_string(), cand.u_star.clone()));
        fields.push(("v_star".to_string(), cand.v_star.clone()));
    }

    let all_pass = no_constant_sign_in_box
        && synchrony.as_ref().map_or(true, |s| s.pass);
    let report = NodalReport {
        command: "solve-nodal".into(),
        grid: GridMeta::of(&prep.grid),
        params: config.params,
        epsilons: schedule.epsilons.clone(),
        n_starts: config.multistart.n_starts,
        seed: config.multistart.seed,
        branches,
        nodal_branch_found,
        chosen_seed_id,
        synchrony,
        mass_diagnostic: mass,
        no_constant_sign_in_box,
        all_pass,
    };
    Ok((report, fields))
}

pub fn cmd_degree(config: &RunConfig) -> Result<(DegreeReport, Vec<(String, Field)>)> {
    let prep = prepare(config)?;
    let setup = certified(config, &prep)?;
    let eps = *config
        .continuation
        .epsilons
        .first()
        .ok_or(Error::EmptySchedule)?;
    let ctx = NodalContext::new(
        &prep.op,
        &config.params,
        &setup,
        &prep.eigen,
        eps,
        config.continuation.mu_chi,
    )?;
    let n = prep.op.n();
    let d = 2 * n;
    let radius = ctx.a_priori_radius();
    let lambda1 = prep.eigen.lambda1;
    let exps = config.degree.f2_exponents;
    let seed = config.multistart.seed;
    let n_starts = config.degree.n_starts;
    let tol = config.solver.tol;

    let witness = check_no_solution_t0(&prep.op);

    let outer = FlatBox::symmetric(radius, d);
    let ball = Domain::boxed(outer.clone());
    let h0 = CompactMap::new(&ctx, HomotopyKind::Plain, 0.0, lambda1, exps);
    let h0_estimate = estimate_degree(&h0, &ball, n_starts, seed, tol)?;

    let h_sweep = homotopy_sweep(
        |t| CompactMap::new(&ctx, HomotopyKind::Plain, t, lambda1, exps),
        &config.degree.t_grid,
        &ball,
        seed,
    );

    let mut hole_upper = ctx.lower_u.values().to_vec();
    hole_upper.extend_from_slice(ctx.lower_v.values());
    let hole = FlatBox {
        lower: hole_upper.iter().map(|b| -b).collect(),
        upper: hole_upper,
    };
    let punctured = Domain::with_hole(outer.clone(), hole.clone());
    let n0 = CompactMap::new(&ctx, HomotopyKind::Anchored, 0.0, lambda1, exps);
    let (n0_estimate, n0_error) = match estimate_degree(&n0, &punctured, n_starts, seed, tol) {
        Ok(est) => (Some(est), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let n_sweep = homotopy_sweep(
        |t| CompactMap::new(&ctx, HomotopyKind::Anchored, t, lambda1, exps),
        &config.degree.t_grid,
        &punctured,
        seed,
    );

    // Domain additivity for the truncated system map (t = 1): the estimate
    // over the full box should split over the punctured box and the hole.
    let h1 = CompactMap::new(&ctx, HomotopyKind::Plain, 1.0, lambda1, exps);
    let est_full = estimate_degree(&h1, &ball, n_starts, seed ^ 1, tol).ok();
    let est_punct = estimate_degree(&h1, &punctured, n_starts, seed ^ 2, tol).ok();
    let est_inner = estimate_degree(&h1, &Domain::boxed(hole), n_starts, seed ^ 3, tol).ok();
    let consistent = match (&est_full, &est_punct, &est_inner) {
        (Some(f), Some(p), Some(i)) => Some(f.value == p.value + i.value),
        _ => None,
    };
    let additivity = AdditivityReport {
        full: est_full.as_ref().map(|e| e.value),
        punctured: est_punct.as_ref().map(|e| e.value),
        inner: est_inner.as_ref().map(|e| e.value),
        consistent,
        note: "signed-count additivity over outer = punctured + hole for the t = 1 map".into(),
    };

    let mut checks = BTreeMap::new();
    checks.insert("no_solution_t0".to_string(), witness.holds);
    checks.insert(
        "h0_degree_zero_empty".to_string(),
        h0_estimate.value == 0 && h0_estimate.zeros.is_empty(),
    );
    checks.insert(
        "n0_degree_nonzero".to_string(),
        n0_estimate.as_ref().map_or(false, |e| e.value != 0),
    );
    checks.insert("h_sweep_positive_margin".to_string(), h_sweep.min_margin > 0.0);
    checks.insert("n_sweep_positive_margin".to_string(), n_sweep.min_margin > 0.0);
    checks.insert(
        "additivity_consistent".to_string(),
        consistent.unwrap_or(true),
    );
    let all_pass = checks.values().all(|&b| b);

    let report = DegreeReport {
        command: "degree".into(),
        grid: GridMeta::of(&prep.grid),
        params: config.params,
        no_solution_t0: witness,
        h0_estimate,
        h_sweep,
        n0_estimate,
        n0_error,
        n_sweep,
        additivity,
        checks,
        all_pass,
    };
    Ok((report, Vec::new()))
}

fn write_outputs<T: serde::Serialize>(
    out_dir: &Path,
    report: &T,
    fields: &[(String, Field)],
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(out_dir.join("report.json"), json + "\n")?;
    for (name, field) in fields {
        std::fs::write(out_dir.join(format!("{name}.csv")), field.to_csv())?;
    }
    Ok(())
}

/// Run one command end to end; returns the process exit code.
pub fn run_command(kind: CommandKind, config: &RunConfig, out_dir: &Path) -> Result<i32> {
    config.validate_for(kind)?;
    log::info!("running `{}` into {}", kind.name(), out_dir.display());
    let code = match kind {
        CommandKind::Eigen => {
            let (report, fields) = cmd_eigen(config)?;
            write_outputs(out_dir, &report, &fields)?;
            0
        }
        CommandKind::Certify => {
            let (report, fields) = cmd_certify(config)?;
            write_outputs(out_dir, &report, &fields)?;
            if report.all_pass {
                0
            } else {
                log::info!("certificate failed: {:?}", report.certificate.failing());
                3
            }
        }
        CommandKind::SolveSign => {
            let (report, fields) = cmd_solve_sign(config)?;
            write_outputs(out_dir, &report, &fields)?;
            if !report.positive.converged {
                2
            } else if report.all_pass {
                0
            } else {
                3
            }
        }
        CommandKind::SolveNodal => {
            let (report, fields) = cmd_solve_nodal(config)?;
            write_outputs(out_dir, &report, &fields)?;
            if report.all_pass {
                0
            } else {
                3
            }
        }
        CommandKind::Degree => {
            let (report, fields) = cmd_degree(config)?;
            write_outputs(out_dir, &report, &fields)?;
            if report.all_pass {
                0
            } else {
                3
            }
        }
    };
    Ok(code)
}

/// Exit code for an error escaping a command.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        _ => 2,
    }
}
