//! Python bindings: graphs, simulation, sampling, estimation, diagnostics and
//! batteries.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::homophily::estimators::{
    coleman_stats, estimate_homophily, extended_true_homophily, true_homophily, DenominatorMode, EstimateRecord,
    ModelKind, Prepared, Problem,
};
use ::homophily::graph::{generate_pa_graph, Graph};
use ::homophily::metrics::{cv_residual_diagnostic, node_level_metrics, ResultRow};
use ::homophily::rng::stream;
use ::homophily::runner::{replication_nodes, run_battery, write_battery, ExperimentConfig};
use ::homophily::sampling::{
    biased_edge_sample, biased_node_sample, random_edge_sample, random_node_sample, GroundTruthMask,
};
use ::homophily::simgen::{gen_features, gen_outcomes, DgpKind, NodeTable, OutcomeCoefficients, ZTransform};

fn err(e: ::homophily::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = ::homophily::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn parse_transform(s: &str) -> PyResult<ZTransform> {
    match s {
        "zscore" => Ok(ZTransform::Zscore),
        "quantile_normal" => Ok(ZTransform::QuantileNormal),
        _ => Err(PyValueError::new_err(format!("unknown z transform `{s}`"))),
    }
}

/// Undirected simple graph.
#[pyclass(name = "Graph", module = "homophily", frozen)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(node_count: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: Graph::from_edges(node_count, edges).map_err(err)? })
    }

    /// Nonlinear preferential attachment graph.
    #[staticmethod]
    #[pyo3(signature = (n, m=5, k=0.8, seed=0))]
    fn preferential_attachment(n: usize, m: usize, k: f64, seed: u64) -> PyResult<Self> {
        let inner = generate_pa_graph(n, m, k, &mut stream(seed, 0, "graph")).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.degrees()
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        if node >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!("node {node} out of range")));
        }
        Ok(self.inner.neighbors(node).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Which nodes and dyads carry observed categories.
#[pyclass(name = "Mask", module = "homophily", frozen)]
struct PyMask {
    inner: GroundTruthMask,
}

#[pymethods]
impl PyMask {
    #[staticmethod]
    fn from_nodes(graph: &PyGraph, labeled: Vec<bool>) -> PyResult<Self> {
        Ok(Self { inner: GroundTruthMask::from_nodes(&graph.inner, labeled).map_err(err)? })
    }

    #[staticmethod]
    fn from_edges(graph: &PyGraph, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self { inner: GroundTruthMask::from_edges(&graph.inner, edges).map_err(err)? })
    }

    #[staticmethod]
    fn full(graph: &PyGraph) -> Self {
        Self { inner: GroundTruthMask::full(&graph.inner) }
    }

    #[staticmethod]
    #[pyo3(signature = (graph, fraction, seed=0))]
    fn random_nodes(graph: &PyGraph, fraction: f64, seed: u64) -> PyResult<Self> {
        let inner = random_node_sample(&graph.inner, fraction, &mut stream(seed, 0, "sample")).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (graph, fraction, seed=0))]
    fn random_edges(graph: &PyGraph, fraction: f64, seed: u64) -> PyResult<Self> {
        let inner = random_edge_sample(&graph.inner, fraction, &mut stream(seed, 0, "sample")).map_err(err)?;
        Ok(Self { inner })
    }

    /// Degree- and feature-biased Bernoulli sample with calibrated intercept.
    #[staticmethod]
    #[pyo3(signature = (graph, x, target_count, level="node", seed=0))]
    fn biased(graph: &PyGraph, x: Vec<f64>, target_count: usize, level: &str, seed: u64) -> PyResult<Self> {
        let nt = NodeTable { x, ..Default::default() };
        let mut rng = stream(seed, 0, "sample");
        let inner = match level {
            "node" => biased_node_sample(&graph.inner, &nt, target_count, &mut rng),
            "edge" => biased_edge_sample(&graph.inner, &nt, target_count, &mut rng),
            _ => return Err(PyValueError::new_err(format!("unknown sampling level `{level}`"))),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn labeled_nodes(&self) -> Vec<bool> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn labeled_node_count(&self) -> usize {
        self.inner.labeled_node_count()
    }

    #[getter]
    fn labeled_dyad_count(&self) -> usize {
        self.inner.labeled_dyad_count()
    }

    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha
    }
}

/// Draws features and outcomes: returns a dict with `x`, `z`, `p`, `y`.
#[pyfunction]
#[pyo3(signature = (graph, dgp="main", seed=0, z_transform="zscore"))]
fn simulate_nodes<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    dgp: &str,
    seed: u64,
    z_transform: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let dgp: DgpKind = parse(dgp)?;
    let mut rng = stream(seed, 0, "nodes");
    let nt = gen_features(&graph.inner, dgp, parse_transform(z_transform)?, &mut rng).map_err(err)?;
    let nt = gen_outcomes(nt, dgp, OutcomeCoefficients::default(), &mut rng).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", nt.x)?;
    d.set_item("z", nt.z)?;
    d.set_item("p", nt.p)?;
    d.set_item("y", nt.y)?;
    Ok(d)
}

/// Average egonet composition of group a, optionally action-weighted.
#[pyfunction]
#[pyo3(name = "homophily", signature = (graph, y, actions=None))]
fn egonet_homophily(graph: &PyGraph, y: Vec<bool>, actions: Option<Vec<f64>>) -> PyResult<f64> {
    match actions {
        Some(a) => extended_true_homophily(&graph.inner, &y, &a),
        None => true_homophily(&graph.inner, &y),
    }
    .map_err(err)
}

/// Coleman numerator, within-group proportion, chance share and index.
#[pyfunction]
fn coleman<'py>(py: Python<'py>, graph: &PyGraph, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = coleman_stats(&graph.inner, &values).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("numerator", s.numerator)?;
    d.set_item("proportion", s.proportion)?;
    d.set_item("chance_share", s.chance_share)?;
    d.set_item("index", s.index)?;
    Ok(d)
}

fn record_dict<'py>(py: Python<'py>, r: &EstimateRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", r.model.as_str())?;
    d.set_item("denominator_mode", r.denominator_mode.as_str())?;
    d.set_item("h_true", r.h_true)?;
    d.set_item("h_hat", r.h_hat)?;
    d.set_item("numerator", r.numerator)?;
    d.set_item("denominator", r.denominator)?;
    d.set_item("relative_error", r.relative_error)?;
    d.set_item("r1", r.r1)?;
    d.set_item("r2", r.r2)?;
    d.set_item("node_auc", r.node_auc)?;
    d.set_item("node_accuracy", r.node_accuracy)?;
    d.set_item("flags", r.flags.to_string())?;
    d.set_item("n_labeled_nodes", r.n_labeled_nodes)?;
    d.set_item("n_labeled_dyads", r.n_labeled_dyads)?;
    Ok(d)
}

/// Fits one strategy on the labeled part of `y` and estimates homophily.
/// Set `truth=True` only when `y` is complete (enables the oracle mode and
/// error metrics).
#[pyfunction]
#[pyo3(signature = (graph, y, mask, model="ego_alter_augmented", mode="plug_in", x=None, truth=false, actions=None))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    y: Vec<bool>,
    mask: &PyMask,
    model: &str,
    mode: &str,
    x: Option<Vec<f64>>,
    truth: bool,
    actions: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let problem =
        Problem { graph: &graph.inner, x: x.as_deref(), y: &y, mask: &mask.inner, truth, actions: actions.as_deref() };
    let rec = estimate_homophily(parse::<ModelKind>(model)?, problem, parse::<DenominatorMode>(mode)?).map_err(err)?;
    record_dict(py, &rec)
}

/// Cross-validated weighted residual diagnostic.
#[pyfunction]
#[pyo3(signature = (graph, y, mask, model="node", x=None, folds=5, permutations=200, seed=0))]
#[allow(clippy::too_many_arguments)]
fn diagnose<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    y: Vec<bool>,
    mask: &PyMask,
    model: &str,
    x: Option<Vec<f64>>,
    folds: usize,
    permutations: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let problem =
        Problem { graph: &graph.inner, x: x.as_deref(), y: &y, mask: &mask.inner, truth: false, actions: None };
    let prep = Prepared::new(problem).map_err(err)?;
    let kind: ModelKind = parse(model)?;
    let r = cv_residual_diagnostic(&prep, kind, folds, permutations, &mut stream(seed, 0, "diagnose")).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fold_sums", r.fold_sums.clone())?;
    d.set_item("total", r.total)?;
    d.set_item("null_low", r.null_low)?;
    d.set_item("null_high", r.null_high)?;
    d.set_item("flagged", r.flagged())?;
    Ok(d)
}

/// AUC and accuracy at 0.5.
#[pyfunction]
fn node_metrics(probs: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    node_level_metrics(&probs, &labels).map_err(err)
}

fn row_dict<'py>(py: Python<'py>, r: &ResultRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rep", r.rep)?;
    d.set_item("dgp", &r.dgp)?;
    d.set_item("sampling", &r.sampling)?;
    d.set_item("model", &r.model)?;
    d.set_item("denominator_mode", &r.denominator_mode)?;
    d.set_item("H_true", r.h_true)?;
    d.set_item("H_hat", r.h_hat)?;
    d.set_item("rel_bias", r.rel_bias)?;
    d.set_item("node_auc", r.node_auc)?;
    d.set_item("node_accuracy", r.node_accuracy)?;
    d.set_item("flag", &r.flag)?;
    Ok(d)
}

/// Runs a battery from a TOML config string. Returns the result rows; also
/// writes the CSV outputs when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config="", out_dir=None))]
fn run_simulation<'py>(py: Python<'py>, config: &str, out_dir: Option<PathBuf>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_toml_str(config).map_err(err)?;
    let battery = py.detach(|| run_battery(&cfg)).map_err(err)?;
    if let Some(dir) = out_dir {
        write_battery(&battery, &dir).map_err(err)?;
    }
    battery.rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Features and outcomes exactly as the battery draws them for one
/// replication of a config.
#[pyfunction]
#[pyo3(signature = (graph, config, rep, dgp))]
fn replication_outcomes(graph: &PyGraph, config: &str, rep: u64, dgp: &str) -> PyResult<(Vec<f64>, Vec<bool>)> {
    let cfg = ExperimentConfig::from_toml_str(config).map_err(err)?;
    let nt = replication_nodes(&cfg, rep, &graph.inner, parse(dgp)?).map_err(err)?;
    Ok((nt.x, nt.y))
}

#[pymodule(name = "homophily")]
fn homophily_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyMask>()?;
    m.add_function(wrap_pyfunction!(simulate_nodes, m)?)?;
    m.add_function(wrap_pyfunction!(egonet_homophily, m)?)?;
    m.add_function(wrap_pyfunction!(coleman, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(node_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(replication_outcomes, m)?)?;
    m.add("MODELS", ModelKind::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
