//! Python bindings: `import giantwalk`.

use std::collections::BTreeMap;

use giantwalk::exploration::ComponentStats;
use giantwalk::harness::{self, ExperimentConfig, Mode};
use giantwalk::sampler::ALGORITHM_ID;
use giantwalk::{oracle, stats, theory, Error};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Domain(_) | Error::Size(_) => PyValueError::new_err(err.to_string()),
        Error::Contract(_) => PyRuntimeError::new_err(err.to_string()),
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => PyOSError::new_err(err.to_string()),
    }
}

fn params(n: usize, lam: Option<f64>, p: Option<f64>) -> PyResult<giantwalk::Params> {
    match (lam, p) {
        (_, Some(p)) => giantwalk::Params::with_p(n, p),
        (Some(lam), None) => giantwalk::Params::new(n, lam),
        (None, None) => return Err(PyValueError::new_err("give either lam or p")),
    }
    .map_err(py_err)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Model parameters `(n, λ)` with `p = λ / n`.
#[pyclass(name = "Params", frozen)]
struct PyParams(giantwalk::Params);

#[pymethods]
impl PyParams {
    #[new]
    fn new(n: usize, lam: f64) -> PyResult<Self> {
        params(n, Some(lam), None).map(PyParams)
    }

    /// Any `p` in `[0, 1]`, including subcritical values.
    #[staticmethod]
    fn with_p(n: usize, p: f64) -> PyResult<Self> {
        params(n, None, Some(p)).map(PyParams)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon()
    }

    fn __repr__(&self) -> String {
        format!("Params(n={}, lam={}, p={})", self.0.n, self.0.lambda, self.0.p)
    }
}

#[pyclass(name = "TheoryValues", frozen, get_all)]
struct PyTheory {
    rho: f64,
    lambda_star: f64,
    sigma2: f64,
    sigma: f64,
    t1: f64,
    a: f64,
}

#[pymethods]
impl PyTheory {
    fn __repr__(&self) -> String {
        format!(
            "TheoryValues(rho={}, lambda_star={}, sigma2={}, t1={}, a={})",
            self.rho, self.lambda_star, self.sigma2, self.t1, self.a
        )
    }
}

/// Closed-form and root-solved quantities for `(n, λ)`.
#[pyfunction(name = "theory")]
fn theory_values(n: usize, lam: f64) -> PyResult<PyTheory> {
    let th = giantwalk::TheoryValues::new(&params(n, Some(lam), None)?).map_err(py_err)?;
    Ok(PyTheory {
        rho: th.rho,
        lambda_star: th.lambda_star,
        sigma2: th.sigma2,
        sigma: th.sigma(),
        t1: th.t1,
        a: th.a,
    })
}

#[pyfunction]
fn solve_rho(lam: f64) -> PyResult<f64> {
    theory::solve_rho(lam).map_err(py_err)
}

#[pyfunction]
fn dual_lambda(lam: f64, rho: f64) -> PyResult<f64> {
    theory::dual_lambda(lam, rho).map_err(py_err)
}

#[pyfunction]
fn sigma2(lam: f64, n: usize) -> PyResult<f64> {
    theory::sigma2(lam, n).map_err(py_err)
}

/// `(f(t), f'(t))` for the idealized trajectory.
#[pyfunction]
fn trajectory_f(n: usize, lam: f64, t: f64) -> PyResult<(f64, f64)> {
    theory::trajectory_f(&params(n, Some(lam), None)?, t).map_err(py_err)
}

/// A recorded walk. Arrays of per-time state are indexed `0..=n`; `eta`
/// holds the `n` draws.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    traj: giantwalk::Trajectory,
    series: giantwalk::MartingaleSeries,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn n(&self) -> usize {
        self.traj.n()
    }

    #[getter]
    fn eta(&self) -> Vec<u64> {
        self.traj.eta.clone()
    }

    #[getter]
    fn active(&self) -> Vec<u64> {
        self.traj.active.clone()
    }

    #[getter]
    fn components(&self) -> Vec<u64> {
        self.traj.components.clone()
    }

    #[getter]
    fn unseen(&self) -> Vec<u64> {
        self.traj.unseen.clone()
    }

    #[getter]
    fn x(&self) -> Vec<i64> {
        self.traj.x.clone()
    }

    #[getter]
    fn xtilde(&self) -> Vec<f64> {
        self.series.xtilde.clone()
    }

    /// Drift, increments, martingale, variance and coupling series.
    fn martingale<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.series;
        let d = PyDict::new(py);
        d.set_item("drift", s.drift.clone())?;
        d.set_item("delta", s.delta.clone())?;
        d.set_item("s", s.s.clone())?;
        d.set_item("xtilde", s.xtilde.clone())?;
        d.set_item("condvar", s.condvar.clone())?;
        d.set_item("coupling", s.coupling.clone())?;
        Ok(d)
    }

    /// Component sizes, largest first.
    fn component_sizes(&self) -> Vec<u64> {
        giantwalk::component_sizes(&self.traj)
    }

    /// Per-replica diagnostics (requires λ > 1).
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let th = giantwalk::TheoryValues::new(&self.traj.params).map_err(py_err)?;
        let s = giantwalk::summarize_replica(&self.traj, &self.series, &th);
        let text = serde_json::to_string(&s).map_err(|e| py_err(e.into()))?;
        json_to_py(py, &text)
    }

    /// Number of violated path identities (0 for a valid walk).
    fn check(&self) -> u64 {
        giantwalk::exploration::check_path(&self.traj, &self.series).total()
    }

    fn __len__(&self) -> usize {
        self.traj.n()
    }
}

/// Run one walk for replica `index` of `seed`.
#[pyfunction]
#[pyo3(signature = (n, lam=None, seed=0, index=0, p=None))]
fn run_walk(
    py: Python<'_>,
    n: usize,
    lam: Option<f64>,
    seed: u64,
    index: u64,
    p: Option<f64>,
) -> PyResult<PyTrajectory> {
    let params = params(n, lam, p)?;
    py.detach(|| {
        let traj = giantwalk::run_walk(&params, &mut giantwalk::seed_stream(seed, index))?;
        let series = giantwalk::martingale_series(&traj);
        Ok(PyTrajectory { traj, series })
    })
    .map_err(py_err)
}

fn stats_tuple(c: ComponentStats) -> (u64, u64, u64) {
    (c.l1, c.l2, c.component_count)
}

/// `(L1, L2, component count)` of a directly sampled graph.
#[pyfunction]
#[pyo3(signature = (n, p, seed=0, index=0))]
fn sample_graph(py: Python<'_>, n: usize, p: f64, seed: u64, index: u64) -> PyResult<(u64, u64, u64)> {
    py.detach(|| oracle::sample_graph(n, p, &mut giantwalk::seed_stream(seed, index)))
        .map(stats_tuple)
        .map_err(py_err)
}

/// Exact distribution of the largest component size, `{size: prob}`.
#[pyfunction]
fn enumerate_pmf(py: Python<'_>, n: usize, p: f64) -> PyResult<BTreeMap<usize, f64>> {
    py.detach(|| oracle::enumerate_pmf(n, p))
        .map(|pmf| pmf.mass)
        .map_err(py_err)
}

/// Monte Carlo experiment; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (n, lam, replicas, seed=0, workers=1))]
fn run_experiment<'py>(
    py: Python<'py>,
    n: usize,
    lam: f64,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let config = ExperimentConfig::mc(params(n, Some(lam), None)?, replicas, seed).with_workers(workers);
    let text = py
        .detach(|| harness::run_experiment(&config).and_then(|r| r.to_json()))
        .map_err(py_err)?;
    json_to_py(py, &text)
}

/// Walk against enumeration (`"enum"`) or sampled graphs (`"graph"`).
#[pyfunction]
#[pyo3(signature = (mode, n, p, replicas, seed=0, workers=1))]
fn validate<'py>(
    py: Python<'py>,
    mode: &str,
    n: usize,
    p: f64,
    replicas: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "enum" => Mode::ValidateEnum,
        "graph" => Mode::ValidateGraph,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let config = ExperimentConfig::mc(params(n, None, Some(p))?, replicas, seed)
        .with_mode(mode)
        .with_workers(workers);
    let text = py
        .detach(|| harness::validate(&config).and_then(|r| r.to_json()))
        .map_err(py_err)?;
    json_to_py(py, &text)
}

#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    stats::normal_cdf(x)
}

/// Kolmogorov-Smirnov distance from the standard normal.
#[pyfunction]
fn ks_normal(mut sample: Vec<f64>) -> PyResult<f64> {
    sample.sort_by(f64::total_cmp);
    stats::ks_one_sample(&sample).map_err(py_err)
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    stats::ks_two_sample(&a, &b).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "giantwalk")]
fn giantwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", giantwalk::VERSION)?;
    m.add("ALGORITHM_ID", ALGORITHM_ID)?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyTheory>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(theory_values, m)?)?;
    m.add_function(wrap_pyfunction!(solve_rho, m)?)?;
    m.add_function(wrap_pyfunction!(dual_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(sigma2, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_f, m)?)?;
    m.add_function(wrap_pyfunction!(run_walk, m)?)?;
    m.add_function(wrap_pyfunction!(sample_graph, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(ks_normal, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    Ok(())
}
