//! Python bindings. Arrays cross the boundary as numpy `float64` (attributes,
//! coefficients, affinities) or `uint8` (adjacency); labels are lists of ints.

use std::path::PathBuf;

use ncagc::checkpoint::Checkpoint;
use ncagc::clustering::{self, AffinityConfig, AffinityMatrix, SPECTRAL_KMEANS_RESTARTS};
use ncagc::config::TrainConfig;
use ncagc::error::Error;
use ncagc::graph::{self, DatasetFormat, Graph};
use ncagc::metrics::{self, MetricReport};
use ncagc::train::{self, AblationVariant, RunResult};
use numpy::{PyArray2, PyReadonlyArray2, ToPyArray};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

create_exception!(ncagc, NumericalError, PyArithmeticError, "Training or clustering diverged.");

fn py_err(e: Error) -> PyErr {
    match &e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ if e.is_numerical() => NumericalError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("acc", m.acc)?;
    d.set_item("nmi", m.nmi)?;
    d.set_item("ari", m.ari)?;
    d.set_item("n", m.n)?;
    Ok(d)
}

/// Renders a Python value the way the config text format expects it.
fn config_value(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if v.is_instance_of::<PyBool>() {
        return Ok(if v.extract::<bool>()? { "true" } else { "false" }.into());
    }
    if let Ok(dims) = v.extract::<Vec<usize>>() {
        let parts: Vec<String> = dims.iter().map(ToString::to_string).collect();
        return Ok(parts.join(","));
    }
    Ok(v.str()?.to_string())
}

/// An attributed, undirected graph with optional ground-truth labels.
#[pyclass(name = "Graph", module = "ncagc", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGraph {
    pub inner: Graph,
}

#[pymethods]
impl PyGraph {
    /// `edges` is a list of `(u, v)` node pairs; edges are symmetrized.
    /// `num_clusters` defaults to the number of distinct labels.
    #[new]
    #[pyo3(signature = (attributes, edges, labels=None, num_clusters=None, name="graph"))]
    fn new(
        attributes: PyReadonlyArray2<'_, f64>,
        edges: Vec<(usize, usize)>,
        labels: Option<Vec<usize>>,
        num_clusters: Option<usize>,
        name: &str,
    ) -> PyResult<Self> {
        let k = match (num_clusters, &labels) {
            (Some(k), _) => k,
            (None, Some(l)) => l.iter().max().map_or(0, |m| m + 1),
            (None, None) => return Err(PyValueError::new_err("num_clusters is required without labels")),
        };
        let inner = Graph::from_edges(name, attributes.as_array().to_owned(), &edges, labels, k).map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (attributes, adjacency, labels=None, num_clusters=None, name="graph"))]
    fn from_adjacency(
        attributes: PyReadonlyArray2<'_, f64>,
        adjacency: PyReadonlyArray2<'_, u8>,
        labels: Option<Vec<usize>>,
        num_clusters: Option<usize>,
        name: &str,
    ) -> PyResult<Self> {
        let k = match (num_clusters, &labels) {
            (Some(k), _) => k,
            (None, Some(l)) => l.iter().max().map_or(0, |m| m + 1),
            (None, None) => return Err(PyValueError::new_err("num_clusters is required without labels")),
        };
        let inner = Graph::new(
            name,
            attributes.as_array().to_owned(),
            adjacency.as_array().to_owned(),
            labels,
            k,
        )
        .map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (nodes_per_cluster, k, num_features, p_in, p_out, seed=0))]
    fn planted_partition(
        nodes_per_cluster: usize,
        k: usize,
        num_features: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = Graph::planted_partition(nodes_per_cluster, k, num_features, p_in, p_out, seed).map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    /// Loads a dataset file; the format is detected from the extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = graph::load_dataset(&path, DatasetFormat::detect(&path)).map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    /// Finds dataset `name` under `data_dir` in any supported format.
    #[staticmethod]
    fn load_named(data_dir: PathBuf, name: &str) -> PyResult<Self> {
        let (path, format) = graph::resolve_dataset(&data_dir, name).map_err(py_err)?;
        let inner = graph::load_dataset(&path, format).map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    /// Writes the graph as a packed archive.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        graph::save_packed(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.inner.num_clusters
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels.clone()
    }

    #[getter]
    fn attributes<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        self.inner.attributes.to_pyarray(py)
    }

    #[getter]
    fn adjacency<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<u8>> {
        self.inner.adjacency.to_pyarray(py)
    }

    fn edge_list(&self) -> Vec<(usize, usize)> {
        self.inner.edge_list()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(name={:?}, nodes={}, edges={}, features={}, clusters={})",
            self.inner.name,
            self.inner.num_nodes(),
            self.inner.num_edges(),
            self.inner.num_features(),
            self.inner.num_clusters
        )
    }
}

/// Training configuration. Keyword overrides use the config-file keys
/// (`lr`, `epochs`, `k`, `lambda1`, `encoder_dims`, ...).
#[pyclass(name = "TrainConfig", module = "ncagc", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTrainConfig {
    pub inner: TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (preset=None, variant="table2", **overrides))]
    fn new(preset: Option<&str>, variant: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = match preset {
            Some(name) => TrainConfig::preset(name, variant).map_err(py_err)?,
            None => TrainConfig::default(),
        };
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                inner.set(&k.extract::<String>()?, &config_value(&v)?).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(PyTrainConfig { inner })
    }

    /// Parses the `key = value` text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let mut inner = TrainConfig::default();
        inner.apply_text(text).map_err(py_err)?;
        inner.validate().map_err(py_err)?;
        Ok(PyTrainConfig { inner })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let mut next = self.inner.clone();
        next.set(key, &config_value(value)?).map_err(py_err)?;
        next.validate().map_err(py_err)?;
        self.inner = next;
        Ok(())
    }

    /// A copy with `overrides` applied.
    #[pyo3(signature = (**overrides))]
    fn replace(&self, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut out = self.clone();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                out.inner.set(&k.extract::<String>()?, &config_value(&v)?).map_err(py_err)?;
            }
        }
        out.inner.validate().map_err(py_err)?;
        Ok(out)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn dataset(&self) -> &str {
        &self.inner.dataset
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.learning_rate
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn hidden_dims(&self) -> Vec<usize> {
        self.inner.hidden_dims.clone()
    }

    #[getter]
    fn neighborhood_size(&self) -> usize {
        self.inner.neighborhood_size
    }

    /// `(lambda1, lambda2, lambda3)`.
    #[getter]
    fn weights(&self) -> (f64, f64, f64) {
        let w = self.inner.weights;
        (w.nbr, w.cse, w.coef)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!("TrainConfig(hash={})", &self.inner.hash()[..12])
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }
}

/// Trained parameters plus the configuration that produced them.
#[pyclass(name = "Checkpoint", module = "ncagc", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyCheckpoint {
    pub inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCheckpoint {
            inner: Checkpoint::load(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.inner.num_clusters
    }

    #[getter]
    fn epochs_completed(&self) -> usize {
        self.inner.epochs_completed
    }

    /// The learned `N x N` coefficient matrix; row `i` expresses node `i`.
    #[getter]
    fn self_expression<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let c = self.inner.self_expression().map_err(py_err)?;
        Ok(c.coefficients.to_pyarray(py))
    }
}

/// Outcome of one training run.
#[pyclass(name = "RunResult", module = "ncagc", frozen)]
pub struct PyRunResult {
    pub inner: RunResult,
}

#[pymethods]
impl PyRunResult {
    /// `{"acc", "nmi", "ari", "n"}`, or `None` without labels or when the
    /// final clustering failed.
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.inner.metrics.as_ref().map(|m| metrics_dict(py, m)).transpose()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.assignment.as_ref().map(|a| a.labels.clone())
    }

    #[getter]
    fn final_error(&self) -> Option<String> {
        self.inner.final_error.clone()
    }

    #[getter]
    fn wall_seconds(&self) -> f64 {
        self.inner.wall_seconds
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn checkpoint(&self) -> PyCheckpoint {
        PyCheckpoint {
            inner: self.inner.checkpoint.clone(),
        }
    }

    /// One dict per epoch with the unweighted terms and the weighted total.
    #[getter]
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = PyList::empty(py);
        for r in &self.inner.history {
            let d = PyDict::new(py);
            d.set_item("epoch", r.epoch)?;
            d.set_item("rec", r.loss.rec)?;
            d.set_item("nbr", r.loss.nbr)?;
            d.set_item("cse", r.loss.cse)?;
            d.set_item("coef", r.loss.coef)?;
            d.set_item("total", r.loss.total)?;
            rows.append(d)?;
        }
        Ok(rows)
    }

    fn __repr__(&self) -> String {
        match &self.inner.metrics {
            Some(m) => format!("RunResult(acc={:.4}, nmi={:.4}, ari={:.4})", m.acc, m.nmi, m.ari),
            None => "RunResult(metrics=None)".into(),
        }
    }
}

/// Trains on `graph`; the GIL is released for the duration.
#[pyfunction]
#[pyo3(name = "train")]
fn py_train(py: Python<'_>, graph: &PyGraph, config: &PyTrainConfig) -> PyResult<PyRunResult> {
    let (g, cfg) = (&graph.inner, &config.inner);
    let inner = py.detach(|| train::train(g, cfg)).map_err(py_err)?;
    Ok(PyRunResult { inner })
}

/// Trains one ablation variant: `full`, `wo_nbr`, `wo_cse` or `wo_att`.
#[pyfunction]
fn run_ablation(py: Python<'_>, graph: &PyGraph, config: &PyTrainConfig, variant: &str) -> PyResult<PyRunResult> {
    let v: AblationVariant = variant.parse().map_err(py_err)?;
    let (g, cfg) = (&graph.inner, &config.inner);
    let inner = py.detach(|| train::run_ablation(g, cfg, v)).map_err(py_err)?;
    Ok(PyRunResult { inner })
}

/// Re-clusters a checkpoint: returns `{"labels", "affinity", "metrics"}`.
#[pyfunction]
#[pyo3(name = "evaluate")]
fn py_evaluate<'py>(py: Python<'py>, checkpoint: &PyCheckpoint, graph: &PyGraph) -> PyResult<Bound<'py, PyDict>> {
    let (c, g) = (&checkpoint.inner, &graph.inner);
    let ev = py.detach(|| train::evaluate(c, g)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("labels", ev.assignment.labels)?;
    d.set_item("affinity", ev.affinity.values.to_pyarray(py))?;
    d.set_item("metrics", ev.metrics.as_ref().map(|m| metrics_dict(py, m)).transpose()?)?;
    Ok(d)
}

#[pyfunction]
fn clustering_accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::clustering_accuracy(&pred, &truth).map_err(py_err)
}

#[pyfunction]
fn nmi(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::nmi(&pred, &truth).map_err(py_err)
}

#[pyfunction]
fn ari(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    metrics::ari(&pred, &truth).map_err(py_err)
}

/// ACC, NMI and ARI in one dict.
#[pyfunction]
fn evaluate_labels<'py>(py: Python<'py>, pred: Vec<usize>, truth: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
    metrics_dict(py, &metrics::evaluate_labels(&pred, &truth).map_err(py_err)?)
}

/// Per-node top-`k` cosine neighbours as an `N x N` boolean array.
#[pyfunction]
fn knn_positive_mask<'py>(
    py: Python<'py>,
    representations: PyReadonlyArray2<'_, f64>,
    k: usize,
) -> PyResult<Bound<'py, PyArray2<bool>>> {
    let mask = ncagc::knn::knn_positive_mask(representations.as_array(), k).map_err(py_err)?;
    Ok(mask.mask().to_pyarray(py))
}

/// Affinity from a coefficient matrix whose column `j` expresses node `j`.
#[pyfunction]
#[pyo3(signature = (coefficients, num_clusters, energy_fraction=1.0, rank_multiplier=4, smoothing=true, power=1.0))]
fn build_affinity<'py>(
    py: Python<'py>,
    coefficients: PyReadonlyArray2<'_, f64>,
    num_clusters: usize,
    energy_fraction: f64,
    rank_multiplier: usize,
    smoothing: bool,
    power: f64,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let cfg = AffinityConfig {
        energy_fraction,
        rank_multiplier,
        smoothing,
        power,
    };
    let a = clustering::build_affinity(coefficients.as_array(), num_clusters, &cfg).map_err(py_err)?;
    Ok(a.values.to_pyarray(py))
}

#[pyfunction]
#[pyo3(signature = (affinity, k, seed=0))]
fn spectral_clustering(affinity: PyReadonlyArray2<'_, f64>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    let a = AffinityMatrix {
        values: affinity.as_array().to_owned(),
    };
    Ok(clustering::spectral_clustering(&a, k, seed).map_err(py_err)?.labels)
}

/// Spectral clustering of the raw adjacency matrix.
#[pyfunction]
#[pyo3(signature = (graph, seed=0))]
fn spectral_baseline(graph: &PyGraph, seed: u64) -> PyResult<Vec<usize>> {
    let g = &graph.inner;
    Ok(clustering::spectral_baseline(&g.adjacency, g.num_clusters, seed)
        .map_err(py_err)?
        .labels)
}

#[pyfunction]
#[pyo3(signature = (points, k, seed=0, restarts=SPECTRAL_KMEANS_RESTARTS))]
fn kmeans(points: PyReadonlyArray2<'_, f64>, k: usize, seed: u64, restarts: usize) -> PyResult<Vec<usize>> {
    Ok(clustering::kmeans(points.as_array(), k, seed, restarts).map_err(py_err)?.labels)
}

#[pymodule]
#[pyo3(name = "ncagc")]
pub fn ncagc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(py_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_ablation, m)?)?;
    m.add_function(wrap_pyfunction!(py_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(clustering_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_labels, m)?)?;
    m.add_function(wrap_pyfunction!(knn_positive_mask, m)?)?;
    m.add_function(wrap_pyfunction!(build_affinity, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_clustering, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add("PRESET_DATASETS", ncagc::config::PRESET_DATASETS.to_vec())?;
    Ok(())
}
