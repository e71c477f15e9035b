//! Python bindings: matrices, graphs, generation, sampling, estimators,
//! detection, metrics and the benchmark driver.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use connbench::bench::plot::{plot as render, Figure};
use connbench::bench::{cohort_csv, parse_grid, records_csv, sweep_csv};
use connbench::chordal;
use connbench::detect::{self, DetectionOutcome, DetectionParams, Sidedness};
use connbench::estimators::{ConnectivityMatrix, EstimatorKind};
use connbench::{bench, gauss, metrics, psdgen, Error};

create_exception!(connbench, ConnbenchError, PyException, "Error raised by the connbench core.");
create_exception!(connbench, CohortInfeasible, ConnbenchError, "Not enough feasible cohort cells.");

fn err(e: Error) -> PyErr {
    match e {
        Error::CohortInfeasible { .. } => CohortInfeasible::new_err(e.to_string()),
        _ => ConnbenchError::new_err(format!("{}: {e}", e.name())),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Dense symmetric matrix.
#[pyclass(name = "SymMatrix", module = "connbench", frozen)]
struct PySymMatrix {
    inner: connbench::SymMatrix,
}

#[pymethods]
impl PySymMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        connbench::SymMatrix::from_rows(&rows).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn identity(p: usize) -> Self {
        Self { inner: connbench::SymMatrix::identity(p) }
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let p = self.inner.p();
        if i >= p || j >= p {
            return Err(ConnbenchError::new_err(format!("index ({i}, {j}) out of range for p = {p}")));
        }
        Ok(self.inner.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        connbench::symlin::eigenvalues(&self.inner)
    }

    fn inverse(&self) -> PyResult<Self> {
        connbench::symlin::inverse_spd(&self.inner).map(|inner| Self { inner }).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SymMatrix(p={})", self.inner.p())
    }
}

/// Undirected simple graph on `p` vertices.
#[pyclass(name = "Adjacency", module = "connbench", frozen)]
struct PyAdjacency {
    inner: connbench::Adjacency,
}

#[pymethods]
impl PyAdjacency {
    #[new]
    #[pyo3(signature = (p, edges=Vec::new()))]
    fn new(p: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        connbench::Adjacency::from_edges(p, &edges).map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.inner.density()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.inner.p() && j < self.inner.p() && self.inner.has_edge(i, j)
    }

    fn is_chordal(&self) -> bool {
        chordal::is_chordal(&self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Adjacency(p={}, n_edges={})", self.inner.p(), self.inner.n_edges())
    }
}

/// `T × p` sample matrix.
#[pyclass(name = "SampleSet", module = "connbench", frozen)]
struct PySampleSet {
    inner: gauss::SampleSet,
}

#[pymethods]
impl PySampleSet {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let t = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(ConnbenchError::new_err("ragged sample rows"));
        }
        let data = rows.into_iter().flatten().collect();
        gauss::SampleSet::new(t, p, data, 0, gauss::Mode::Covariance, "python").map(|inner| Self { inner }).map_err(err)
    }

    #[getter]
    fn t(&self) -> usize {
        self.inner.t()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.t()).map(|r| self.inner.row(r).to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("SampleSet(t={}, p={})", self.inner.t(), self.inner.p())
    }
}

/// Benchmark configuration, built from the JSON config format.
#[pyclass(name = "ExperimentConfig", module = "connbench", frozen)]
struct PyConfig {
    inner: bench::ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        bench::ExperimentConfig::from_json(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }
}

fn outcome(o: DetectionOutcome) -> (PyAdjacency, Option<f64>) {
    (PyAdjacency { inner: o.adjacency }, o.chosen_threshold)
}

fn connectivity(c: &PySymMatrix, kind: &str) -> PyResult<ConnectivityMatrix> {
    Ok(ConnectivityMatrix::new(c.inner.clone(), parse::<EstimatorKind>(kind)?))
}

#[pyfunction]
fn random_chordal(p: usize, d: f64, seed: u64) -> PyResult<PyAdjacency> {
    chordal::random_chordal(p, d, seed).map(|inner| PyAdjacency { inner }).map_err(err)
}

/// Draw a chordal support of density `d` and project a random target onto
/// the constraint set; raises if the cell is infeasible for this seed.
#[pyfunction]
#[pyo3(signature = (p, b, d, seed, mode="covariance"))]
fn generate_cell(py: Python<'_>, p: usize, b: f64, d: f64, seed: u64, mode: &str) -> PyResult<(PyAdjacency, PySymMatrix)> {
    let mode = parse::<gauss::Mode>(mode)?;
    let (support, result) = py.detach(|| psdgen::generate_cell(p, b, d, mode, seed)).map_err(err)?;
    let matrix = result.require_feasible().map_err(err)?;
    Ok((PyAdjacency { inner: support }, PySymMatrix { inner: matrix }))
}

#[pyfunction]
fn support_mean(m: &PySymMatrix, support: &PyAdjacency) -> f64 {
    psdgen::support_mean(&m.inner, &support.inner)
}

#[pyfunction]
#[pyo3(signature = (sigma, t, seed, mode="covariance"))]
fn sample_mvn(sigma: &PySymMatrix, t: usize, seed: u64, mode: &str) -> PyResult<PySampleSet> {
    gauss::sample_mvn(&sigma.inner, t, seed, parse(mode)?).map(|inner| PySampleSet { inner }).map_err(err)
}

/// `kind`: empirical_corr, empirical_pcorr, lw_corr, lw_pcorr or empirical_cov.
#[pyfunction]
fn estimate(x: &PySampleSet, kind: &str) -> PyResult<PySymMatrix> {
    connbench::estimators::estimate(&x.inner, parse(kind)?).map(|c| PySymMatrix { inner: c.values }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (r, t, dof_adjust=0, sidedness="one_sided_positive"))]
fn pearson_pvalues(r: &PySymMatrix, t: usize, dof_adjust: usize, sidedness: &str) -> PyResult<PySymMatrix> {
    let side: Sidedness = parse(sidedness)?;
    detect::pearson_pvalues(&r.inner, t, dof_adjust, side).map(|inner| PySymMatrix { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pvalues, alpha=0.05))]
fn bonferroni(pvalues: &PySymMatrix, alpha: f64) -> PyAdjacency {
    PyAdjacency { inner: detect::bonferroni(&pvalues.inner, alpha).adjacency }
}

#[pyfunction]
#[pyo3(signature = (pvalues, alpha=0.05))]
fn benjamini_yekutieli(pvalues: &PySymMatrix, alpha: f64) -> PyAdjacency {
    PyAdjacency { inner: detect::benjamini_yekutieli(&pvalues.inner, alpha).adjacency }
}

#[pyfunction]
#[pyo3(signature = (c, tau, kind="empirical_corr"))]
fn fixed_threshold(c: &PySymMatrix, tau: f64, kind: &str) -> PyResult<(PyAdjacency, Option<f64>)> {
    Ok(outcome(detect::fixed_threshold(&connectivity(c, kind)?, tau)))
}

#[pyfunction]
#[pyo3(signature = (c, q, kind="empirical_corr"))]
fn fixed_proportion(c: &PySymMatrix, q: f64, kind: &str) -> PyResult<(PyAdjacency, Option<f64>)> {
    Ok(outcome(detect::fixed_proportion(&connectivity(c, kind)?, q)))
}

/// Largest threshold keeping the thresholded graph connected.
#[pyfunction]
#[pyo3(signature = (c, kind="empirical_corr"))]
fn percolation_threshold(c: &PySymMatrix, kind: &str) -> PyResult<(PyAdjacency, Option<f64>)> {
    Ok(outcome(detect::percolation_threshold(&connectivity(c, kind)?)))
}

#[pyfunction]
#[pyo3(signature = (c, kind="empirical_corr"))]
fn mixture_threshold(c: &PySymMatrix, kind: &str) -> PyResult<(PyAdjacency, Option<f64>)> {
    detect::mixture_threshold(&connectivity(c, kind)?, &DetectionParams::default()).map(outcome).map_err(err)
}

/// Returns `(precision, edges, converged)`.
#[pyfunction]
#[pyo3(signature = (s, lam, tol=1e-6, max_iter=500))]
fn graphical_lasso(py: Python<'_>, s: &PySymMatrix, lam: f64, tol: f64, max_iter: usize) -> PyResult<(PySymMatrix, PyAdjacency, bool)> {
    let fit = py.detach(|| detect::graphical_lasso(&s.inner, lam, tol, max_iter)).map_err(err)?;
    Ok((PySymMatrix { inner: fit.precision }, PyAdjacency { inner: fit.outcome.adjacency }, fit.converged))
}

/// Returns `(edges, chosen lambda)`.
#[pyfunction]
fn glasso_cv(py: Python<'_>, x: &PySampleSet) -> PyResult<(PyAdjacency, f64)> {
    let fit = py.detach(|| detect::glasso_cv(&x.inner, &DetectionParams::default())).map_err(err)?;
    Ok((PyAdjacency { inner: fit.outcome.adjacency }, fit.lambda))
}

#[pyfunction]
fn confusion(estimated: &PyAdjacency, truth: &PyAdjacency) -> PyResult<HashMap<&'static str, usize>> {
    let c = metrics::confusion(&estimated.inner, &truth.inner).map_err(err)?;
    Ok(HashMap::from([("tp", c.tp), ("tn", c.tn), ("fp", c.fp), ("fn", c.fn_)]))
}

#[pyfunction]
fn auc(scores: &PySymMatrix, truth: &PyAdjacency) -> PyResult<f64> {
    metrics::auc(&scores.inner, &truth.inner).map_err(err)
}

/// Runs the full sweep; returns `(cohort_csv, results_csv)`.
#[pyfunction]
fn run_benchmark(py: Python<'_>, config: &PyConfig) -> PyResult<(String, String)> {
    let out = py.detach(|| bench::run_benchmark(&config.inner)).map_err(err)?;
    Ok((cohort_csv(&out.cohort), records_csv(&out.records)))
}

/// `grid` uses the CLI's `a:b:step` syntax.
#[pyfunction]
#[pyo3(signature = (config, grid="0:1:0.01"))]
fn threshold_sweep(py: Python<'_>, config: &PyConfig, grid: &str) -> PyResult<String> {
    let grid = parse_grid(grid).map_err(err)?;
    let rows = py.detach(|| bench::threshold_sweep(&config.inner, &grid)).map_err(err)?;
    Ok(sweep_csv(&rows))
}

/// Render a figure (SVG text) from a CSV produced by this package.
#[pyfunction]
fn plot(figure: &str, csv: &str) -> PyResult<String> {
    let figure: Figure = parse(figure)?;
    render(figure, csv).map_err(err)
}

#[pymodule]
#[pyo3(name = "connbench")]
fn connbench_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ConnbenchError", py.get_type::<ConnbenchError>())?;
    m.add("CohortInfeasible", py.get_type::<CohortInfeasible>())?;
    m.add_class::<PySymMatrix>()?;
    m.add_class::<PyAdjacency>()?;
    m.add_class::<PySampleSet>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(random_chordal, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cell, m)?)?;
    m.add_function(wrap_pyfunction!(support_mean, m)?)?;
    m.add_function(wrap_pyfunction!(sample_mvn, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_pvalues, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(benjamini_yekutieli, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_proportion, m)?)?;
    m.add_function(wrap_pyfunction!(percolation_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(mixture_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(graphical_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(glasso_cv, m)?)?;
    m.add_function(wrap_pyfunction!(confusion, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(plot, m)?)?;
    Ok(())
}
