//! Python bindings for `retroscore`.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use retroscore::data::{CaseControlDataset, PrevalenceSpec};
use retroscore::io::{read_dataset, write_dataset, ColumnSpec};
use retroscore::procedures::{Analysis as CoreAnalysis, Method, TestOptions, TestResult as CoreResult};
use retroscore::pvalue::{self, MvnConfig, DEFAULT_QUAD_NODES};
use retroscore::simulation::{self as sim, RunConfig, SimulationOutput};
use retroscore::Error;

const DEFAULT_SEED: u64 = 20_240_601;

fn py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> PyResult<DMatrix<f64>> {
    if rows.len() != n {
        return Err(PyValueError::new_err(format!("{what} has {} rows, expected {n}", rows.len())));
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} rows have different lengths")));
    }
    Ok(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Case-control data: phenotype `d`, covariates `x` (n×dx) and genotypes `y` (n×q).
#[pyclass(module = "retroscore", frozen, skip_from_py_object)]
struct Dataset {
    inner: CaseControlDataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(d: Vec<u8>, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = d.len();
        let inner = CaseControlDataset::new(d, matrix(&x, n, "x")?, matrix(&y, n, "y")?).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Read a CSV or TSV file. Column lists are comma separated; a trailing
    /// `*` matches by prefix.
    #[staticmethod]
    #[pyo3(signature = (path, phenotype = "d", covariates = "x*", genotypes = "y*"))]
    fn read(path: &str, phenotype: &str, covariates: &str, genotypes: &str) -> PyResult<Self> {
        let spec = ColumnSpec::from_lists(phenotype, covariates, genotypes);
        Ok(Self { inner: read_dataset(path, &spec).map_err(py_err)? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_dataset(path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn n0(&self) -> usize {
        self.inner.n0()
    }

    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn d(&self) -> Vec<u8> {
        self.inner.d().to_vec()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        rows(self.inner.x())
    }

    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        rows(self.inner.y())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n0={}, n1={}, dx={}, q={})",
            self.inner.n0(),
            self.inner.n1(),
            self.inner.dx(),
            self.inner.q()
        )
    }
}

#[pyclass(module = "retroscore", frozen, skip_from_py_object)]
struct TestResult {
    inner: CoreResult,
}

#[pymethods]
impl TestResult {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn statistic(&self) -> f64 {
        self.inner.statistic
    }

    #[getter]
    fn p_value(&self) -> f64 {
        self.inner.p_value
    }

    #[getter]
    fn alpha_grid(&self) -> Vec<f64> {
        self.inner.alpha_grid.clone()
    }

    #[getter]
    fn u1_standardized(&self) -> Vec<f64> {
        self.inner.u1_standardized.clone()
    }

    #[getter]
    fn u2_standardized(&self) -> Option<f64> {
        self.inner.u2_standardized
    }

    #[getter]
    fn numeric_error(&self) -> f64 {
        self.inner.numeric_error
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "TestResult(method={}, statistic={}, p_value={})",
            self.inner.method.name(),
            self.inner.statistic,
            self.inner.p_value
        )
    }
}

/// Exactly one anchor may be given; MAX tests fall back to the default
/// interval and FS to the fitted intercept.
fn prevalence_spec(
    method: Option<Method>,
    alpha_p: Option<f64>,
    prevalence: Option<f64>,
    interval: Option<(f64, f64, usize)>,
    fitted: bool,
) -> PyResult<PrevalenceSpec> {
    let given = [alpha_p.is_some(), prevalence.is_some(), interval.is_some(), fitted];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(PyValueError::new_err("give only one of alpha_p, prevalence, interval, fitted"));
    }
    let spec = match (alpha_p, prevalence, interval) {
        (Some(alpha_p), _, _) => PrevalenceSpec::KnownAlphaP { alpha_p },
        (_, Some(p), _) => PrevalenceSpec::KnownPrevalence { p },
        (_, _, Some((b1, b2, m))) => PrevalenceSpec::Interval { b1, b2, m },
        _ if fitted || method == Some(Method::Fs) => PrevalenceSpec::Fitted,
        _ if method.is_some_and(Method::is_max) => sim::MAX_INTERVAL,
        _ => return Err(PyValueError::new_err("a prevalence anchor is required")),
    };
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

fn options(seed: u64, grid_literal: bool) -> TestOptions {
    TestOptions {
        grid_literal,
        mvn: MvnConfig::default().with_seed(seed),
        ..TestOptions::default()
    }
}

/// Null fits, scores and variance estimates for one dataset and anchor.
#[pyclass(module = "retroscore", frozen, skip_from_py_object)]
struct Analysis {
    inner: CoreAnalysis,
}

#[pymethods]
impl Analysis {
    #[new]
    #[pyo3(signature = (dataset, *, alpha_p = None, prevalence = None, interval = None, fitted = false, seed = DEFAULT_SEED, grid_literal = false))]
    fn new(
        dataset: &Dataset,
        alpha_p: Option<f64>,
        prevalence: Option<f64>,
        interval: Option<(f64, f64, usize)>,
        fitted: bool,
        seed: u64,
        grid_literal: bool,
    ) -> PyResult<Self> {
        let spec = prevalence_spec(None, alpha_p, prevalence, interval, fitted)?;
        let inner = CoreAnalysis::new(&dataset.inner, &spec, &options(seed, grid_literal)).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha_grid(&self) -> Vec<f64> {
        self.inner.scores.alpha_grid.clone()
    }

    #[getter]
    fn u1(&self) -> Vec<f64> {
        self.inner.scores.u1.clone()
    }

    #[getter]
    fn u2(&self) -> f64 {
        self.inner.scores.u2
    }

    #[getter]
    fn sigma11(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.variance.sigma11)
    }

    #[getter]
    fn sigma22(&self) -> f64 {
        self.inner.variance.sigma22
    }

    #[getter]
    fn u1s(&self) -> Option<Vec<f64>> {
        self.inner.u1s.clone()
    }

    #[getter]
    fn u2s(&self) -> Option<f64> {
        self.inner.u2s
    }

    /// Run one of `fs`, `rs`, `ss`, `rs-max`, `ss-max`.
    fn run(&self, method: &str) -> PyResult<TestResult> {
        let m = Method::parse(method).map_err(py_err)?;
        Ok(TestResult { inner: self.inner.run(m).map_err(py_err)? })
    }
}

/// One-shot test: `run_test(ds, "rs", alpha_p=-3.0)`.
#[pyfunction]
#[pyo3(signature = (dataset, method, *, alpha_p = None, prevalence = None, interval = None, fitted = false, seed = DEFAULT_SEED, grid_literal = false))]
#[allow(clippy::too_many_arguments)]
fn run_test(
    dataset: &Dataset,
    method: &str,
    alpha_p: Option<f64>,
    prevalence: Option<f64>,
    interval: Option<(f64, f64, usize)>,
    fitted: bool,
    seed: u64,
    grid_literal: bool,
) -> PyResult<TestResult> {
    let m = Method::parse(method).map_err(py_err)?;
    let spec = prevalence_spec(Some(m), alpha_p, prevalence, interval, fitted)?;
    let a = CoreAnalysis::new(&dataset.inner, &spec, &options(seed, grid_literal)).map_err(py_err)?;
    Ok(TestResult { inner: a.run(m).map_err(py_err)? })
}

fn mvn_config(seed: u64, target_error: f64) -> PyResult<MvnConfig> {
    let cfg = MvnConfig { target_abs_error: target_error, ..MvnConfig::default().with_seed(seed) };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// `P(X ≤ upper)` for `X ~ N(0, corr)`; returns `(probability, error)`.
#[pyfunction]
#[pyo3(signature = (upper, corr, *, seed = DEFAULT_SEED, target_error = MvnConfig::default().target_abs_error))]
fn mvn_cdf(upper: Vec<f64>, corr: Vec<Vec<f64>>, seed: u64, target_error: f64) -> PyResult<(f64, f64)> {
    let c = matrix(&corr, upper.len(), "corr")?;
    let r = pvalue::mvn_cdf(&upper, &c, &mvn_config(seed, target_error)?).map_err(py_err)?;
    Ok((r.prob, r.abs_error_estimate))
}

/// Tail probability of the RS-MAX null law; returns `(p, error)`.
#[pyfunction]
#[pyo3(signature = (t, sigma_s, *, seed = DEFAULT_SEED, target_error = MvnConfig::default().target_abs_error))]
fn rsmax_sf(t: f64, sigma_s: Vec<Vec<f64>>, seed: u64, target_error: f64) -> PyResult<(f64, f64)> {
    let s = matrix(&sigma_s, sigma_s.len(), "sigma_s")?;
    let r = pvalue::rsmax_sf(t, &s, &mvn_config(seed, target_error)?).map_err(py_err)?;
    Ok((r.prob, r.abs_error_estimate))
}

/// Tail probability of the SS-MAX null law; returns `(p, error)`.
#[pyfunction]
#[pyo3(signature = (t, sigma_s, *, seed = DEFAULT_SEED, target_error = MvnConfig::default().target_abs_error, quad_nodes = DEFAULT_QUAD_NODES))]
fn ssmax_sf(t: f64, sigma_s: Vec<Vec<f64>>, seed: u64, target_error: f64, quad_nodes: usize) -> PyResult<(f64, f64)> {
    let s = matrix(&sigma_s, sigma_s.len(), "sigma_s")?;
    let r = pvalue::ssmax_sf(t, &s, &mvn_config(seed, target_error)?, quad_nodes).map_err(py_err)?;
    Ok((r.prob, r.abs_error_estimate))
}

#[pyfunction]
fn rs_mixture_sf(t: f64) -> PyResult<f64> {
    pvalue::rs_mixture_sf(t).map_err(py_err)
}

#[pyfunction]
fn ss_mixture_sf(t: f64) -> PyResult<f64> {
    pvalue::ss_mixture_sf(t).map_err(py_err)
}

#[pyclass(module = "retroscore", frozen, skip_from_py_object)]
struct Simulation {
    inner: SimulationOutput,
}

fn sim_method(label: &str) -> PyResult<sim::SimMethod> {
    let ms = sim::parse_methods(label).map_err(py_err)?;
    match ms.as_slice() {
        [m] => Ok(*m),
        _ => Err(PyValueError::new_err(format!("expected one method, got {label:?}"))),
    }
}

#[pymethods]
impl Simulation {
    /// Rejection table as a list of dicts.
    fn table<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .table
            .cells
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("method", c.method.label())?;
                d.set_item("scenario", &c.scenario)?;
                d.set_item("k", c.k)?;
                d.set_item("level", c.level)?;
                d.set_item("rejections", c.rejections)?;
                d.set_item("reps", c.reps)?;
                d.set_item("skipped", c.skipped)?;
                d.set_item("proportion", c.proportion)?;
                d.set_item("std_error", c.std_error)?;
                d.set_item("mean_prevalence", c.mean_prevalence)?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn failed_replicates(&self) -> usize {
        self.inner.table.failed_replicates
    }

    fn p_values(&self, method: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.p_values(sim_method(method)?))
    }

    fn statistics(&self, method: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.statistics(sim_method(method)?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Run a preset scenario such as `("C3", 3)`. `methods` is a comma list of
/// labels like `"RS(alpha_p),SS-MAX"` or `"all"`.
#[pyfunction]
#[pyo3(signature = (scenario, k = 0, *, reps = 2000, level = 0.05, seed = DEFAULT_SEED, methods = "all", workers = 0, n0 = None, n1 = None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    scenario: &str,
    k: usize,
    reps: usize,
    level: f64,
    seed: u64,
    methods: &str,
    workers: usize,
    n0: Option<usize>,
    n1: Option<usize>,
) -> PyResult<Simulation> {
    let mut sc = sim::scenario_preset(scenario, k).map_err(py_err)?;
    sc.n0 = n0.unwrap_or(sc.n0);
    sc.n1 = n1.unwrap_or(sc.n1);
    let ms = sim::parse_methods(methods).map_err(py_err)?;
    let mut cfg = RunConfig::new(reps, level, seed);
    cfg.workers = workers;
    let out = py.detach(|| sim::run_scenario(&sc, &ms, &cfg)).map_err(py_err)?;
    Ok(Simulation { inner: out })
}

#[pymodule]
#[pyo3(name = "retroscore")]
fn retroscore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    m.add_class::<Dataset>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<TestResult>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(run_test, m)?)?;
    m.add_function(wrap_pyfunction!(mvn_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(rsmax_sf, m)?)?;
    m.add_function(wrap_pyfunction!(ssmax_sf, m)?)?;
    m.add_function(wrap_pyfunction!(rs_mixture_sf, m)?)?;
    m.add_function(wrap_pyfunction!(ss_mixture_sf, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
