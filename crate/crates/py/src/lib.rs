//! Python bindings for `ssw_core`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ssw_core::experiment::{run_experiment as core_run_experiment, ExperimentConfig};
use ssw_core::stability::{
    check_assumption_a, check_assumption_b, estimate_hitting_time as core_hitting_time, field_from_spec,
    radial_sweep, AssumptionReport,
};
use ssw_core::{DecisionVector, Error, ObjectiveVector, Problem, ProblemConfig, StepParams};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::BudgetTooSmall { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows(points: &[ObjectiveVector]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.to_vec()).collect()
}

/// True when `a` Pareto-dominates `b` (minimization).
#[pyfunction]
fn dominates(a: Vec<f64>, b: Vec<f64>) -> PyResult<bool> {
    ssw_core::dominates(&a, &b).map_err(to_py)
}

/// Min-norm element of the convex hull of the Jacobian rows.
/// Returns `(q, weights, norm_sq)`.
#[pyfunction]
fn solve_min_norm(jacobian: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let jac = ssw_core::Jacobian::from_rows(jacobian).map_err(to_py)?;
    let d = ssw_core::solve_min_norm(&jac).map_err(to_py)?;
    Ok((d.q, d.weights.into_inner(), d.norm_sq))
}

/// `(gd_p, igd_p, delta_p)` of `approx` against `reference`.
#[pyfunction]
#[pyo3(signature = (approx, reference, p = 1.0))]
fn delta_p(approx: Vec<Vec<f64>>, reference: Vec<Vec<f64>>, p: f64) -> PyResult<(f64, f64, f64)> {
    let r = ssw_core::delta_p(&approx, &reference, p).map_err(to_py)?;
    Ok((r.gd_p, r.igd_p, r.delta_p))
}

/// `(median, iqr)` with type-7 quantiles.
#[pyfunction]
fn median_iqr(values: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = ssw_core::median_iqr(&values).map_err(to_py)?;
    Ok((s.median, s.iqr))
}

#[pyclass(frozen)]
struct Dtlz2 {
    inner: ssw_core::Dtlz2,
}

#[pymethods]
impl Dtlz2 {
    #[new]
    #[pyo3(signature = (m, k = 10))]
    fn new(m: usize, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ssw_core::Dtlz2::new(m, k).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_var(&self) -> usize {
        self.inner.n_var()
    }

    #[getter]
    fn n_obj(&self) -> usize {
        self.inner.n_obj()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(ssw_core::dtlz2_evaluate(&self.inner, &x).map_err(to_py)?.into_inner())
    }

    fn jacobian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        if x.len() != self.inner.n_var() {
            return Err(PyValueError::new_err("wrong decision vector length"));
        }
        let j = self.inner.analytic_jacobian(&x).expect("DTLZ2 has an analytic Jacobian");
        Ok(j.rows().map(|r| r.to_vec()).collect())
    }

    #[pyo3(signature = (count, seed = 0))]
    fn reference_front(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let front = ssw_core::dtlz2_reference_front(self.inner.m(), count, seed).map_err(to_py)?;
        Ok(rows(&front))
    }
}

#[pyclass]
#[derive(Default)]
struct ParetoArchive {
    inner: ssw_core::ParetoArchive,
}

#[pymethods]
impl ParetoArchive {
    #[new]
    #[pyo3(signature = (capacity = None))]
    fn new(capacity: Option<usize>) -> Self {
        Self {
            inner: match capacity {
                Some(c) => ssw_core::ParetoArchive::with_capacity_limit(c),
                None => ssw_core::ParetoArchive::new(),
            },
        }
    }

    /// Offers `(x, f)`; returns whether it was added.
    fn insert(&mut self, x: Vec<f64>, f: Vec<f64>) -> PyResult<bool> {
        let x = DecisionVector::new(x).map_err(to_py)?;
        let f = ObjectiveVector::new(f).map_err(to_py)?;
        if let Some(e) = self.inner.entries().first() {
            if e.f.len() != f.len() {
                return Err(PyValueError::new_err("objective count differs from archive entries"));
            }
        }
        Ok(self.inner.insert(x, f))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn objectives(&self) -> Vec<Vec<f64>> {
        self.inner.entries().iter().map(|e| e.f.to_vec()).collect()
    }

    fn decisions(&self) -> Vec<Vec<f64>> {
        self.inner.entries().iter().map(|e| e.x.to_vec()).collect()
    }
}

#[pyclass(frozen, get_all)]
struct RunResult {
    archive_f: Vec<Vec<f64>>,
    archive_x: Vec<Vec<f64>>,
    final_population: Vec<Vec<f64>>,
    generations_completed: usize,
    evaluations_used: u64,
    wall_time_s: f64,
}

impl From<ssw_core::RunResult> for RunResult {
    fn from(r: ssw_core::RunResult) -> Self {
        Self {
            archive_f: r.archive.entries().iter().map(|e| e.f.to_vec()).collect(),
            archive_x: r.archive.entries().iter().map(|e| e.x.to_vec()).collect(),
            final_population: rows(&r.final_population),
            generations_completed: r.generations_completed,
            evaluations_used: r.evaluations_used,
            wall_time_s: r.wall_time_s,
        }
    }
}

fn build_problem(problem: &str, m: Option<usize>, size: Option<usize>) -> PyResult<ssw_core::problems::Benchmark> {
    ProblemConfig::from_name(problem, m, size)
        .and_then(|c| c.build())
        .map_err(to_py)
}

/// Runs SSW on a registered problem ("dtlz2" with `m`, `k`; "quad2" with `k` as dimension).
#[pyfunction]
#[pyo3(signature = (problem = "dtlz2", m = None, k = None, population = 100, sigma = 0.05, eps = 0.15, budget = 30_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn run_ssw(
    py: Python<'_>,
    problem: &str,
    m: Option<usize>,
    k: Option<usize>,
    population: usize,
    sigma: f64,
    eps: f64,
    budget: u64,
    seed: u64,
) -> PyResult<RunResult> {
    let bench = build_problem(problem, m, k)?;
    let config = ssw_core::SswConfig {
        population,
        sigma,
        eps,
        budget,
        seed,
        ..Default::default()
    };
    py.detach(|| ssw_core::run_ssw(bench.problem(), &config))
        .map(RunResult::from)
        .map_err(to_py)
}

/// Runs the NSGA-II baseline on a registered problem.
#[pyfunction]
#[pyo3(signature = (problem = "dtlz2", m = None, k = None, population = 100, budget = 30_000, seed = 0))]
fn run_nsga2(
    py: Python<'_>,
    problem: &str,
    m: Option<usize>,
    k: Option<usize>,
    population: usize,
    budget: u64,
    seed: u64,
) -> PyResult<RunResult> {
    let bench = build_problem(problem, m, k)?;
    let config = ssw_core::Nsga2Config {
        population,
        budget,
        seed,
        ..Default::default()
    };
    py.detach(|| ssw_core::run_nsga2(bench.problem(), &config))
        .map(RunResult::from)
        .map_err(to_py)
}

/// Runs a full experiment from a JSON config and returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config_json, jobs = None))]
fn run_experiment(py: Python<'_>, config_json: &str, jobs: Option<usize>) -> PyResult<String> {
    let config: ExperimentConfig =
        serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let summary = py.detach(|| core_run_experiment(&config, jobs)).map_err(to_py)?;
    serde_json::to_string(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn report_tuple(r: AssumptionReport) -> (f64, f64, usize) {
    (r.pass_fraction, r.worst_violation, r.samples_tested)
}

/// Dissipativity probe on the radial sweep. Returns
/// `(pass_fraction, worst_violation, samples_tested)`.
#[pyfunction]
#[pyo3(signature = (field, theta0 = 1.0, r = 2.0, dim = 2, seed = 1))]
fn assumption_a(field: &str, theta0: f64, r: f64, dim: usize, seed: u64) -> PyResult<(f64, f64, usize)> {
    let f = field_from_spec(field, dim).map_err(to_py)?;
    let samples = radial_sweep(dim, r, seed);
    check_assumption_a(f.as_ref(), theta0, r, &samples)
        .map(report_tuple)
        .map_err(to_py)
}

/// Coercivity probe on the radial sweep.
#[pyfunction]
#[pyo3(signature = (field, mu = 0.5, r = 2.0, dim = 2, seed = 1))]
fn assumption_b(field: &str, mu: f64, r: f64, dim: usize, seed: u64) -> PyResult<(f64, f64, usize)> {
    let f = field_from_spec(field, dim).map_err(to_py)?;
    let samples = radial_sweep(dim, r, seed);
    check_assumption_b(f.as_ref(), mu, r, &samples)
        .map(report_tuple)
        .map_err(to_py)
}

/// Expected time to enter the ball of radius `p` around the origin from
/// `x0`. Returns `(mean, ci_low, ci_high, hit_fraction)`.
#[pyfunction]
#[pyo3(signature = (field, x0, p = 1.0, sigma = 0.01, eps = 0.15, replicas = 1000, max_steps = 1_000_000, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn hitting_time(
    py: Python<'_>,
    field: &str,
    x0: Vec<f64>,
    p: f64,
    sigma: f64,
    eps: f64,
    replicas: usize,
    max_steps: u64,
    seed: u64,
) -> PyResult<(f64, f64, f64, f64)> {
    let f = field_from_spec(field, x0.len()).map_err(to_py)?;
    let params = StepParams::new(sigma, eps).map_err(to_py)?;
    let origin = vec![0.0; x0.len()];
    let h = py
        .detach(|| core_hitting_time(f.as_ref(), &x0, &origin, p, params, replicas, max_steps, seed))
        .map_err(to_py)?;
    Ok((h.mean, h.ci_low, h.ci_high, h.hit_fraction))
}

#[pymodule]
pub fn ssw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(dominates, m)?)?;
    m.add_function(wrap_pyfunction!(solve_min_norm, m)?)?;
    m.add_function(wrap_pyfunction!(delta_p, m)?)?;
    m.add_function(wrap_pyfunction!(median_iqr, m)?)?;
    m.add_function(wrap_pyfunction!(run_ssw, m)?)?;
    m.add_function(wrap_pyfunction!(run_nsga2, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(assumption_a, m)?)?;
    m.add_function(wrap_pyfunction!(assumption_b, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_time, m)?)?;
    m.add_class::<Dtlz2>()?;
    m.add_class::<ParetoArchive>()?;
    m.add_class::<RunResult>()?;
    Ok(())
}
