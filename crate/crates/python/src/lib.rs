//! Python bindings. Structured values cross the boundary as JSON, so configs
//! and reports look the same as the files the CLI reads and writes.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;

use sdane_core::harness::{
    self, ExperimentConfig, GapMetric, RunReport, TraceFormat, TraceRecord,
};
use sdane_core::problems::{
    dissimilarity_report, EstimateMode, EstimateOptions, GeneratorParams, ProblemInstance,
};
use sdane_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Trace(_) => PyIOError::new_err(e.to_string()),
        Error::SolverCap { .. } | Error::ReferenceSolve { .. } | Error::DegenerateCoordinate { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts either a JSON string or any object `json.dumps` understands.
fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.downcast::<PyString>() {
        return Ok(s.to_string());
    }
    let json = obj.py().import("json")?;
    json.call_method1("dumps", (obj,))?.extract()
}

fn py_json(py: Python<'_>, text: &str) -> PyResult<PyObject> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn check_dim(p: &ProblemInstance, x: &[f64]) -> PyResult<()> {
    if x.len() != p.d {
        return Err(py_err(Error::DimensionMismatch { expected: p.d, got: x.len() }));
    }
    Ok(())
}

/// A federated problem: n clients sharing a dimension d.
#[pyclass(name = "Problem", module = "sdane")]
#[derive(Clone)]
struct PyProblem {
    inner: ProblemInstance,
}

#[pymethods]
impl PyProblem {
    /// Generate from generator parameters, e.g. `{"family": "quadratic", "n": 10, ...}`.
    #[staticmethod]
    fn generate(params: &Bound<'_, PyAny>) -> PyResult<Self> {
        let params: GeneratorParams = serde_json::from_str(&json_text(params)?).map_err(json_err)?;
        Ok(PyProblem { inner: params.generate().map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyProblem { inner: ProblemInstance::load(path).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyProblem { inner: ProblemInstance::from_json(text).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn family(&self) -> PyResult<String> {
        let v = serde_json::to_value(self.inner.family).map_err(json_err)?;
        Ok(v.as_str().unwrap_or_default().to_string())
    }

    #[getter]
    fn x_star(&self) -> Option<Vec<f64>> {
        self.inner.x_star.clone()
    }

    #[getter]
    fn f_star(&self) -> Option<f64> {
        self.inner.f_star
    }

    /// Average objective value.
    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&self.inner, &x)?;
        Ok(self.inner.value(&x))
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&self.inner, &x)?;
        Ok(self.inner.grad(&x))
    }

    /// `f(x) - f*`, or `None` without a reference solution.
    fn gap(&self, x: Vec<f64>) -> PyResult<Option<f64>> {
        check_dim(&self.inner, &x)?;
        Ok(self.inner.gap(&x))
    }

    /// Recompute and store the reference solution, returning `(x*, f*)`.
    #[pyo3(signature = (tol=1e-10))]
    fn solve_reference(&mut self, tol: f64) -> PyResult<(Vec<f64>, f64)> {
        sdane_core::problems::reference_solve(&mut self.inner, tol).map_err(py_err)
    }

    /// δ_s, Δ_s, δ_max and ζ as a dict.
    #[pyo3(signature = (s_values=None, mode=None, probes=32))]
    fn dissimilarity(
        &self,
        py: Python<'_>,
        s_values: Option<Vec<usize>>,
        mode: Option<&str>,
        probes: usize,
    ) -> PyResult<PyObject> {
        let mode = match mode {
            Some(m) => serde_json::from_value(serde_json::Value::String(m.to_string())).map_err(json_err)?,
            None if self.inner.all_quadratic() => EstimateMode::ExactQuadratic,
            None => EstimateMode::PowerIteration,
        };
        let s = s_values.unwrap_or_else(|| vec![self.inner.n()]);
        let opts = EstimateOptions { probes, seed: self.inner.seed, ..Default::default() };
        let report = dissimilarity_report(&self.inner, &s, mode, &opts).map_err(py_err)?;
        py_json(py, &serde_json::to_string(&report).map_err(json_err)?)
    }

    fn __repr__(&self) -> PyResult<String> {
        Ok(format!("Problem(family={}, n={}, d={})", self.family()?, self.inner.n(), self.inner.d))
    }
}

/// Validated experiment configuration.
#[pyclass(name = "ExperimentConfig", module = "sdane")]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new(config: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::from_json(&json_text(config)?).map_err(py_err)? })
    }

    /// Relative problem paths resolve against the config file's directory.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::load(path).map_err(py_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        py_json(py, &self.to_json()?)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn rounds(&self) -> usize {
        self.inner.rounds
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }
}

/// Per-round metrics of one run.
#[pyclass(name = "Trace", module = "sdane")]
#[derive(Clone)]
struct PyTrace {
    records: Vec<TraceRecord>,
}

#[pymethods]
impl PyTrace {
    /// Format follows the extension: `.jsonl` or CSV.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTrace { records: harness::read_trace(path).map_err(py_err)? })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTrace { records: harness::parse_trace(text).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        harness::write_trace(&self.records, path, TraceFormat::from_path(std::path::Path::new(path))).map_err(py_err)
    }

    fn to_csv(&self) -> String {
        harness::render_trace(&self.records, TraceFormat::Csv)
    }

    /// One dict per round; non-finite values appear as strings.
    fn records(&self, py: Python<'_>) -> PyResult<Vec<PyObject>> {
        harness::render_trace(&self.records, TraceFormat::Jsonl)
            .lines()
            .map(|line| py_json(py, line))
            .collect()
    }

    /// One column as a list, e.g. `trace.column("f_gap_last")`.
    fn column(&self, name: &str) -> PyResult<Vec<Option<f64>>> {
        let pick: fn(&TraceRecord) -> Option<f64> = match name {
            "round" => |r| Some(r.round as f64),
            "f_gap_last" => |r| Some(r.f_gap_last),
            "f_gap_avg" => |r| Some(r.f_gap_avg),
            "dist_sq_v" => |r| Some(r.dist_sq_v),
            "dist_sq_x" => |r| Some(r.dist_sq_x),
            "lambda_used" => |r| Some(r.lambda_used),
            "s_used" => |r| Some(r.s_used as f64),
            "cum_comm_rounds" => |r| Some(r.cum_comm_rounds as f64),
            "cum_vectors" => |r| Some(r.cum_vectors as f64),
            "cum_oracle_total" => |r| Some(r.cum_oracle_total as f64),
            "cum_oracle_parallel" => |r| Some(r.cum_oracle_parallel as f64),
            "potential_sdane" => |r| r.potential_sdane,
            "potential_acc" => |r| r.potential_acc,
            _ => return Err(PyValueError::new_err(format!("unknown trace column {name:?}"))),
        };
        Ok(self.records.iter().map(pick).collect())
    }

    fn __len__(&self) -> usize {
        self.records.len()
    }
}

/// Outcome of `run`.
#[pyclass(name = "RunResult", module = "sdane")]
struct PyRunResult {
    report: RunReport,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn trace(&self) -> PyTrace {
        PyTrace { records: self.report.records.clone() }
    }

    #[getter]
    fn x_final(&self) -> Vec<f64> {
        self.report.final_state.x.clone()
    }

    #[getter]
    fn x_avg(&self) -> Vec<f64> {
        self.report.final_state.averaged_output().to_vec()
    }

    #[getter]
    fn x_history(&self) -> Vec<Vec<f64>> {
        self.report.x_history.clone()
    }

    #[getter]
    fn lambda_history(&self) -> Vec<f64> {
        self.report.lambda_history.clone()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.report.mu
    }

    #[getter]
    fn reached_eps(&self) -> bool {
        self.report.reached_eps
    }

    /// `(round, client ids)` for rounds where a local solver hit its cap.
    #[getter]
    fn capped(&self) -> Vec<(usize, Vec<usize>)> {
        self.report.capped.clone()
    }
}

/// Run an experiment. With `problem` given, the config's problem source is
/// ignored and the instance is used as is.
#[pyfunction]
#[pyo3(signature = (config, problem=None))]
fn run(py: Python<'_>, config: &Bound<'_, PyAny>, problem: Option<&PyProblem>) -> PyResult<PyRunResult> {
    let cfg = match config.downcast::<PyConfig>() {
        Ok(c) => c.borrow().inner.clone(),
        Err(_) => PyConfig::new(config)?.inner,
    };
    let mut instance = problem.map(|p| p.inner.clone());
    let report = py
        .allow_threads(move || match instance.as_mut() {
            Some(p) => harness::run_on_problem(&cfg, p),
            None => harness::run_experiment(&cfg),
        })
        .map_err(py_err)?;
    Ok(PyRunResult { report })
}

/// Rounds and oracle calls to reach `eps` for each named trace, plus the
/// pairwise orderings, as a dict.
#[pyfunction]
#[pyo3(signature = (traces, eps, metric="last"))]
fn compare(py: Python<'_>, traces: Vec<(String, PyTrace)>, eps: f64, metric: &str) -> PyResult<PyObject> {
    let metric = match metric {
        "last" => GapMetric::Last,
        "avg" => GapMetric::Avg,
        other => return Err(PyValueError::new_err(format!("metric must be \"last\" or \"avg\", got {other:?}"))),
    };
    let named: Vec<(String, Vec<TraceRecord>)> = traces.into_iter().map(|(n, t)| (n, t.records)).collect();
    let report = harness::compare(&named, eps, metric).map_err(py_err)?;
    py_json(py, &serde_json::to_string(&report).map_err(json_err)?)
}

#[pymodule]
fn sdane(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
