//! Python bindings for `rho-core`.
//!
//! Configs cross the boundary as JSON-compatible dicts; arrays as lists.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rho_core::cli::{self, RunConfig};
use rho_core::data::{self, SynthSpec};
use rho_core::model::{ModelConfig, ModelParams};
use rho_core::{checkpoint, eval, RhoError};

fn err(e: RhoError) -> PyErr {
    match e {
        RhoError::Io { .. } | RhoError::Diverged { .. } | RhoError::NonFinite(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn from_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Node-attributed graph with binary anomaly labels.
#[pyclass(name = "Dataset", module = "rho_py", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(edges: Vec<(usize, usize)>, features: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<Self> {
        let n = labels.len();
        let graph = rho_core::Graph::from_edges(&edges, n).map_err(err)?;
        let cols = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("feature rows have differing lengths"));
        }
        let flat: Vec<f64> = features.into_iter().flatten().collect();
        let x = Array2::from_shape_vec((flat.len() / cols.max(1), cols), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyDataset {
            inner: data::Dataset::new(graph, x, labels).map_err(err)?,
        })
    }

    /// Reads `edges.csv`, `features.csv` or `features.bin`, `labels.csv` and
    /// an optional `split.json`.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: data::load_dataset(&dir).map_err(err)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(&dir).map_err(err)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.graph.num_edges()
    }

    #[getter]
    fn num_anomalies(&self) -> usize {
        self.inner.num_anomalies()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.labels.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features.outer_iter().map(|r| r.to_vec()).collect()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph.edges().collect()
    }

    /// Per-node label homophily; isolated nodes map to `None`.
    fn homophily(&self) -> PyResult<Vec<Option<f64>>> {
        let report = rho_core::node_homophily(&self.inner.graph, &self.inner.labels).map_err(err)?;
        Ok((0..self.inner.num_nodes()).map(|v| report.value_of(v)).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(nodes={}, edges={}, anomalies={}, features={})",
            self.inner.num_nodes(),
            self.inner.graph.num_edges(),
            self.inner.num_anomalies(),
            self.inner.features.ncols()
        )
    }
}

/// Trained parameters together with the config they were built for.
#[pyclass(name = "Model", module = "rho_py")]
struct PyModel {
    config: ModelConfig,
    params: ModelParams,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (config, params) = checkpoint::load(&path).map_err(err)?;
        Ok(PyModel { config, params })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&path, &self.config, &self.params).map_err(err)
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.config)
    }

    /// Cross-channel filter coefficient of each layer.
    #[getter]
    fn ccr_coefficients(&self) -> Vec<f64> {
        self.params.ccr_k.to_vec()
    }

    /// Channel-wise coefficients, one list per layer.
    #[getter]
    fn cwr_coefficients(&self) -> Vec<Vec<f64>> {
        self.params.cwr_k.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Anomaly score of every node; higher is more anomalous.
    fn score(&self, dataset: &PyDataset) -> PyResult<Vec<f64>> {
        let d = &dataset.inner;
        Ok(eval::score(&d.graph, &self.params, d.features.view(), &self.config)
            .map_err(err)?
            .to_vec())
    }
}

/// Output of [`train`].
#[pyclass(name = "TrainResult", module = "rho_py")]
struct PyTrainResult {
    outcome: cli::TrainOutcome,
}

#[pymethods]
impl PyTrainResult {
    #[getter]
    fn auroc(&self) -> f64 {
        self.outcome.metrics.auroc
    }

    #[getter]
    fn auprc(&self) -> f64 {
        self.outcome.metrics.auprc
    }

    #[getter]
    fn scores(&self) -> Vec<f64> {
        self.outcome.scores.to_vec()
    }

    #[getter]
    fn labeled(&self) -> Vec<usize> {
        self.outcome.split.labeled.clone()
    }

    #[getter]
    fn test(&self) -> Vec<usize> {
        self.outcome.split.test.clone()
    }

    /// One dict per epoch with `epoch`, `l_ccr`, `l_cwr`, `l_gna`, `total`.
    #[getter]
    fn log<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.outcome.log)
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &self.outcome.config)
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel {
            config: self.outcome.config.model.clone(),
            params: self.outcome.params.clone(),
        }
    }
}

/// Generates a synthetic dataset. `preset` is one of `"80-20"`, `"50-50"`,
/// `"20-80"`; keyword arguments override individual generator fields.
#[pyfunction]
#[pyo3(signature = (preset=None, **overrides))]
fn synth<'py>(
    py: Python<'py>,
    preset: Option<&str>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<(PyDataset, Bound<'py, PyAny>)> {
    let base = match preset {
        Some(p) => SynthSpec::preset(p).map_err(err)?,
        None => SynthSpec::default(),
    };
    let mut value = serde_json::to_value(base).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(o) = overrides {
        merge(&mut value, to_json(py, o.as_any())?);
    }
    let spec: SynthSpec = serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = py.detach(|| data::synth_dataset(&spec)).map_err(err)?;
    Ok((PyDataset { inner: out.dataset }, from_json(py, &out.report)?))
}

/// Splits, trains, scores and evaluates. `config` follows the nested layout
/// of the CLI's `--config` file and may be partial.
#[pyfunction]
#[pyo3(signature = (dataset, config=None, seed=0))]
fn train(py: Python<'_>, dataset: &PyDataset, config: Option<&Bound<'_, PyDict>>, seed: u64) -> PyResult<PyTrainResult> {
    let mut value = serde_json::to_value(RunConfig::default()).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(c) = config {
        merge(&mut value, to_json(py, c.as_any())?);
    }
    value["seed"] = seed.into();
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let data = dataset.inner.clone();
    let outcome = py.detach(move || cli::train_pipeline(&data, &cfg)).map_err(err)?;
    Ok(PyTrainResult { outcome })
}

/// Area under the ROC curve with midrank ties.
#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::auroc(&scores, &labels).map_err(err)
}

/// Average precision with scores ranked descending.
#[pyfunction]
fn auprc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::auprc(&scores, &labels).map_err(err)
}

#[pymodule]
fn rho_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    Ok(())
}
