//! Python bindings: grids, problem parameters, the eigenpair, certified
//! rectangles, the constant-sign and nodal solvers, and the scalar
//! truncation operators.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gmsolve::config::RunConfig;
use gmsolve::nodal::{
    classify, continuation, multistart_regularized, sign_synchrony_report, ContinuationSchedule,
    NodalContext, SolutionClass,
};
use gmsolve::sign_solver::{check_separation, negate, solve_positive, SolveOptions};
use gmsolve::{
    assemble_neumann_operator, choose_constants, principal_eigenpair, Constants, Error, Field,
    ProblemParams,
};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidField(_)
        | Error::InvalidParams(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Uniform tensor grid over an interval or a rectangle.
#[pyclass(name = "Grid")]
struct PyGrid {
    inner: Arc<gmsolve::Grid>,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, extents: Vec<f64>, nodes: Vec<usize>) -> PyResult<Self> {
        let grid = gmsolve::build_grid(dim, &extents, &nodes).map_err(to_py_err)?;
        Ok(PyGrid {
            inner: Arc::new(grid),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.axes().iter().map(|a| a.spacing).collect()
    }

    fn coords(&self, idx: usize) -> PyResult<Vec<f64>> {
        if idx >= self.inner.node_count() {
            return Err(PyValueError::new_err("node index out of range"));
        }
        Ok(self.inner.node_coords(idx))
    }

    /// Trapezoid quadrature of nodal values.
    fn integrate(&self, values: Vec<f64>) -> PyResult<f64> {
        let f = Field::from_values(&self.inner, values).map_err(to_py_err)?;
        Ok(gmsolve::integrate(&f))
    }

    fn __repr__(&self) -> String {
        format!(
            "Grid(dim={}, nodes={:?})",
            self.inner.dim(),
            self.inner
                .axes()
                .iter()
                .map(|a| a.nodes)
                .collect::<Vec<_>>()
        )
    }
}

/// Exponents and source parameter of the coupled system.
#[pyclass(name = "Params")]
#[derive(Clone)]
struct PyParams {
    inner: ProblemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha1, alpha2, beta1, beta2, rho, f1_scale = 1.0, f2_scale = 1.0))]
    fn new(
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
        rho: f64,
        f1_scale: f64,
        f2_scale: f64,
    ) -> PyResult<Self> {
        let inner = ProblemParams::new(alpha1, alpha2, beta1, beta2, rho)
            .and_then(|p| p.with_scales(f1_scale, f2_scale))
            .map_err(to_py_err)?;
        Ok(PyParams { inner })
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    /// max(alpha1 + 2 beta1, alpha2 + beta2 / 2); valid parameters keep it
    /// below 1.
    #[getter]
    fn exponent_condition_value(&self) -> f64 {
        self.inner.exponent_condition_value()
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(alpha=({}, {}), beta=({}, {}), rho={})",
            self.inner.alpha1, self.inner.alpha2, self.inner.beta1, self.inner.beta2,
            self.inner.rho
        )
    }
}

/// (lambda1, mu_bar, mu_underbar, phi1) of the Neumann operator.
#[pyfunction]
fn eigenpair(grid: &PyGrid) -> PyResult<(f64, f64, f64, Vec<f64>)> {
    let op = assemble_neumann_operator(&grid.inner);
    let pair = principal_eigenpair(&op, 1e-10).map_err(to_py_err)?;
    Ok((
        pair.lambda1,
        pair.mu_bar(),
        pair.mu_underbar(),
        pair.phi1.values().to_vec(),
    ))
}

/// Certified constants and inequality margins.
#[pyclass(name = "CertifyResult")]
struct PyCertifyResult {
    #[pyo3(get)]
    all_pass: bool,
    #[pyo3(get)]
    c: f64,
    #[pyo3(get)]
    c0: f64,
    #[pyo3(get)]
    doublings: u32,
    #[pyo3(get)]
    failing: Vec<String>,
    #[pyo3(get)]
    lower: Vec<f64>,
    #[pyo3(get)]
    upper: Vec<f64>,
    #[pyo3(get)]
    json: String,
}

#[pyfunction]
#[pyo3(signature = (grid, params, c = None, c0 = None))]
fn certify(
    grid: &PyGrid,
    params: &PyParams,
    c: Option<f64>,
    c0: Option<f64>,
) -> PyResult<PyCertifyResult> {
    let op = assemble_neumann_operator(&grid.inner);
    let eigen = principal_eigenpair(&op, 1e-10).map_err(to_py_err)?;
    let forced = match (c, c0) {
        (None, None) => None,
        (cv, c0v) => Some(
            Constants::forced(cv.unwrap_or(2.0), c0v.unwrap_or(2.0)).map_err(to_py_err)?,
        ),
    };
    let setup =
        choose_constants(&op, &eigen, &params.inner, 1e-10, forced).map_err(to_py_err)?;
    let json = serde_json::to_string(&setup.certificate)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyCertifyResult {
        all_pass: setup.certificate.all_pass,
        c: setup.aux.constants.c,
        c0: setup.aux.constants.c0,
        doublings: setup.doublings,
        failing: setup
            .certificate
            .failing()
            .into_iter()
            .map(String::from)
            .collect(),
        lower: setup.positive.u.lower.values().to_vec(),
        upper: setup.positive.u.upper.values().to_vec(),
        json,
    })
}

/// Constant-sign solution pair with separation margins.
#[pyclass(name = "SignResult")]
struct PySignResult {
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    u_plus: Vec<f64>,
    #[pyo3(get)]
    v_plus: Vec<f64>,
    #[pyo3(get)]
    u_minus: Vec<f64>,
    #[pyo3(get)]
    v_minus: Vec<f64>,
    #[pyo3(get)]
    separation_margin: f64,
    #[pyo3(get)]
    separation_pass: bool,
}

#[pyfunction]
#[pyo3(signature = (grid, params, tol = 1e-8))]
fn solve_sign(grid: &PyGrid, params: &PyParams, tol: f64) -> PyResult<PySignResult> {
    let op = assemble_neumann_operator(&grid.inner);
    let eigen = principal_eigenpair(&op, 1e-10).map_err(to_py_err)?;
    let setup = choose_constants(&op, &eigen, &params.inner, 1e-10, None).map_err(to_py_err)?;
    let opts = SolveOptions {
        tol,
        ..SolveOptions::default()
    };
    let positive = solve_positive(&op, &params.inner, &setup.positive, &opts).map_err(to_py_err)?;
    let negative = negate(&op, &params.inner, &positive).map_err(to_py_err)?;
    let sep = check_separation(&positive, &setup.positive);
    Ok(PySignResult {
        converged: positive.converged,
        residual: positive.residual_sup(),
        iterations: positive.iterations,
        u_plus: positive.u.values().to_vec(),
        v_plus: positive.v.values().to_vec(),
        u_minus: negative.u.values().to_vec(),
        v_minus: negative.v.values().to_vec(),
        separation_margin: sep.margin_u,
        separation_pass: sep.pass,
    })
}

/// Outcome of the nodal multistart continuation.
#[pyclass(name = "NodalResult")]
struct PyNodalResult {
    #[pyo3(get)]
    found: bool,
    #[pyo3(get)]
    u_star: Option<Vec<f64>>,
    #[pyo3(get)]
    v_star: Option<Vec<f64>>,
    #[pyo3(get)]
    min_product: Option<f64>,
    #[pyo3(get)]
    synchrony_pass: Option<bool>,
    #[pyo3(get)]
    branches: usize,
}

#[pyfunction]
#[pyo3(signature = (grid, params, epsilons = None, n_starts = 16, seed = 42, tol = 1e-8))]
fn solve_nodal(
    grid: &PyGrid,
    params: &PyParams,
    epsilons: Option<Vec<f64>>,
    n_starts: usize,
    seed: u64,
    tol: f64,
) -> PyResult<PyNodalResult> {
    let op = assemble_neumann_operator(&grid.inner);
    let eigen = principal_eigenpair(&op, 1e-10).map_err(to_py_err)?;
    let setup = choose_constants(&op, &eigen, &params.inner, 1e-10, None).map_err(to_py_err)?;
    let schedule = ContinuationSchedule::new(
        epsilons.unwrap_or_else(|| (1..=6).map(|k| 0.5f64.powi(k)).collect()),
        tol,
    )
    .map_err(to_py_err)?;
    let ctx = NodalContext::new(&op, &params.inner, &setup, &eigen, schedule.epsilons[0], 0.1)
        .map_err(to_py_err)?;
    let initial = multistart_regularized(&ctx, n_starts, seed, tol, 200).map_err(to_py_err)?;
    let branches = initial.len();
    for branch in &initial {
        let cand = continuation(
            &ctx,
            &schedule,
            &branch.solution.u,
            &branch.solution.v,
            None,
            200,
        )
        .map_err(to_py_err)?;
        if cand.complete
            && classify(&cand.u_star, &cand.v_star, tol) == SolutionClass::NodalSynchronized
        {
            let rep = sign_synchrony_report(&cand.u_star, &cand.v_star, tol);
            return Ok(PyNodalResult {
                found: true,
                u_star: Some(cand.u_star.values().to_vec()),
                v_star: Some(cand.v_star.values().to_vec()),
                min_product: Some(rep.min_product),
                synchrony_pass: Some(rep.pass),
                branches,
            });
        }
    }
    Ok(PyNodalResult {
        found: false,
        u_star: None,
        v_star: None,
        min_product: None,
        synchrony_pass: None,
        branches,
    })
}

/// The exact summation witness that the free homotopy end has no solutions.
#[pyfunction]
fn no_solution_witness(grid: &PyGrid) -> (bool, usize) {
    let op = assemble_neumann_operator(&grid.inner);
    let w = gmsolve::degree::check_no_solution_t0(&op);
    (w.holds, w.node_count)
}

#[pyfunction]
fn sign_shift(eps: f64, s: f64) -> f64 {
    gmsolve::model::sign_shift(eps, s)
}

#[pyfunction]
fn clamp_sym(s: f64, bound: f64) -> f64 {
    gmsolve::model::clamp_sym(s, bound)
}

#[pyfunction]
fn shifted_clamp(eps: f64, s: f64, bound: f64) -> f64 {
    gmsolve::model::shifted_clamp(eps, s, bound)
}

#[pyfunction]
fn anchored_clamp(phi: f64, s: f64) -> f64 {
    gmsolve::model::anchored_clamp(phi, s)
}

#[pyfunction]
fn near_zero_ramp(mu: f64, s: f64) -> f64 {
    gmsolve::model::near_zero_ramp(mu, s)
}

/// Parse an INI run configuration (the same format the CLI reads) and
/// return its JSON report for the given command, without touching the
/// filesystem. Intended for quick scripting.
#[pyfunction]
fn run_report(command: &str, config_text: &str) -> PyResult<String> {
    let config = RunConfig::parse(config_text).map_err(to_py_err)?;
    let json = match command {
        "eigen" => serde_json::to_string_pretty(&gmsolve::cli::cmd_eigen(&config).map_err(to_py_err)?.0),
        "certify" => {
            serde_json::to_string_pretty(&gmsolve::cli::cmd_certify(&config).map_err(to_py_err)?.0)
        }
        "solve-sign" => serde_json::to_string_pretty(
            &gmsolve::cli::cmd_solve_sign(&config).map_err(to_py_err)?.0,
        ),
        "solve-nodal" => serde_json::to_string_pretty(
            &gmsolve::cli::cmd_solve_nodal(&config).map_err(to_py_err)?.0,
        ),
        "degree" => {
            serde_json::to_string_pretty(&gmsolve::cli::cmd_degree(&config).map_err(to_py_err)?.0)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown command `{other}`"
            )))
        }
    };
    json.map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn gmsolve_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyCertifyResult>()?;
    m.add_class::<PySignResult>()?;
    m.add_class::<PyNodalResult>()?;
    m.add_function(wrap_pyfunction!(eigenpair, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sign, m)?)?;
    m.add_function(wrap_pyfunction!(solve_nodal, m)?)?;
    m.add_function(wrap_pyfunction!(no_solution_witness, m)?)?;
    m.add_function(wrap_pyfunction!(sign_shift, m)?)?;
    m.add_function(wrap_pyfunction!(clamp_sym, m)?)?;
    m.add_function(wrap_pyfunction!(shifted_clamp, m)?)?;
    m.add_function(wrap_pyfunction!(anchored_clamp, m)?)?;
    m.add_function(wrap_pyfunction!(near_zero_ramp, m)?)?;
    m.add_function(wrap_pyfunction!(run_report, m)?)?;
    Ok(())
}
