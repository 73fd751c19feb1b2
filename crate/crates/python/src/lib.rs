//! Python bindings. Configuration records cross the boundary as plain dicts
//! with the same field names as the TOML config.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use tard::datagen::{self, DomainSpec, ShiftSpec};
use tard::eval::{self, Variant};
use tard::graph::PropagationEvent;
use tard::nn::Matrix;
use tard::pipeline::{self, AdaptSettings, Sample, TrainConfig, TrainedModel};

fn to_py_err(e: tard::Error) -> PyErr {
    match e {
        tard::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Python dict (or None) → Rust record, through JSON.
fn from_dict<T: DeserializeOwned + Default>(
    py: Python<'_>,
    value: Option<&Bound<'_, PyDict>>,
) -> PyResult<T> {
    let Some(dict) = value else {
        return Ok(T::default());
    };
    let json: String = py
        .import("json")?
        .call_method1("dumps", (dict,))?
        .extract()?;
    serde_json::from_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (json,))
}

/// One propagation cascade: a tree of posts with a feature row per node.
#[pyclass(name = "Event", from_py_object)]
#[derive(Clone)]
struct PyEvent {
    inner: PropagationEvent,
}

#[pymethods]
impl PyEvent {
    #[new]
    fn new(
        id: String,
        label: usize,
        edges: Vec<(usize, usize)>,
        features: Vec<Vec<f64>>,
    ) -> PyResult<Self> {
        if features.iter().any(|r| r.len() != features[0].len()) {
            return Err(PyValueError::new_err(
                "feature rows must all have the same length",
            ));
        }
        let features = Matrix::from_rows(&features);
        let inner = PropagationEvent {
            id,
            label,
            edges,
            features,
        };
        inner.validate(usize::MAX).map_err(to_py_err)?;
        Ok(PyEvent { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn label(&self) -> usize {
        self.inner.label
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features.to_rows()
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Event(id={:?}, label={}, nodes={})",
            self.inner.id,
            self.inner.label,
            self.inner.num_nodes()
        )
    }
}

fn unwrap_events(events: Vec<PyEvent>) -> Vec<PropagationEvent> {
    events.into_iter().map(|e| e.inner).collect()
}

fn samples(model: &TrainedModel, events: Vec<PyEvent>) -> PyResult<Vec<Sample>> {
    pipeline::prepare(&unwrap_events(events), model.config.adjacency).map_err(to_py_err)
}

/// A trained network plus the training-set embedding statistics.
#[pyclass(name = "Model")]
struct PyModel {
    inner: TrainedModel,
}

impl PyModel {
    fn settings(
        &self,
        py: Python<'_>,
        overrides: Option<&Bound<'_, PyDict>>,
    ) -> PyResult<AdaptSettings> {
        let mut settings = self.inner.config.adapt_settings();
        if let Some(o) = overrides {
            let merged: serde_json::Value = {
                let mut base = serde_json::to_value(settings).expect("settings serialize");
                let extra: serde_json::Value =
                    from_dict::<serde_json::Map<_, _>>(py, Some(o))?.into();
                for (k, v) in extra.as_object().expect("dict").clone() {
                    if base.get(&k).is_none() {
                        return Err(PyValueError::new_err(format!(
                            "unknown adaptation setting {k:?}"
                        )));
                    }
                    base[k] = v;
                }
                base
            };
            settings =
                serde_json::from_value(merged).map_err(|e| PyValueError::new_err(e.to_string()))?;
        }
        Ok(settings)
    }
}

#[pymethods]
impl PyModel {
    /// Loads a checkpoint written by `save` or by the command-line tool.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: pipeline::load_checkpoint(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        pipeline::save_checkpoint(&self.inner, &path).map_err(to_py_err)
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.config)
    }

    #[getter]
    fn train_stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.train_stats)
    }

    /// Mean training loss per epoch as `(main, ssl, total)` tuples.
    #[getter]
    fn history(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .log
            .epochs
            .iter()
            .map(|e| (e.main_loss, e.ssl_loss, e.total_loss))
            .collect()
    }

    /// Class probabilities without adaptation.
    fn predict_proba(&self, event: PyEvent) -> PyResult<Vec<f64>> {
        let s = samples(&self.inner, vec![event])?;
        tard::model::predict_proba(&s[0].graph, &self.inner.params).map_err(to_py_err)
    }

    /// Adapts on each event and predicts. `settings` may override `alpha2`,
    /// `ttt_lr`, `ttt_steps`, `mode` and `seed`. Returns a dict with
    /// `metrics` and per-event `records`.
    #[pyo3(signature = (events, settings=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        events: Vec<PyEvent>,
        settings: Option<&Bound<'py, PyDict>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let settings = self.settings(py, settings)?;
        let test = samples(&self.inner, events)?;
        let eval = py
            .detach(|| pipeline::evaluate(&test, &self.inner, &settings))
            .map_err(to_py_err)?;
        #[derive(Serialize)]
        struct Out<'a> {
            metrics: &'a eval::MetricsReport,
            records: &'a [pipeline::EventResult],
        }
        to_dict(
            py,
            &Out {
                metrics: &eval.metrics,
                records: &eval.records,
            },
        )
    }

    /// Metrics of TARD, TARD-constraint and TARD-ttt against this model.
    fn ablate<'py>(&self, py: Python<'py>, events: Vec<PyEvent>) -> PyResult<Bound<'py, PyAny>> {
        let test = samples(&self.inner, events)?;
        let model = self.inner.clone();
        let ablation = py
            .detach(|| eval::ablate_trained(model, &test))
            .map_err(to_py_err)?;
        let out: serde_json::Map<String, serde_json::Value> = Variant::ALL
            .iter()
            .map(|&v| {
                let m = serde_json::to_value(&ablation.get(v).metrics).expect("metrics serialize");
                (v.name().to_string(), m)
            })
            .collect();
        to_dict(py, &out)
    }

    fn __repr__(&self) -> String {
        let d = self.inner.params.dims();
        format!(
            "Model(d_in={}, d_hidden={}, classes={}, epochs={})",
            d.d_in,
            d.d_hidden,
            d.classes,
            self.inner.log.epochs.len()
        )
    }
}

/// Generates events for a domain spec dict; missing fields take defaults.
#[pyfunction]
#[pyo3(signature = (spec=None, id_prefix="ev-"))]
fn generate_domain(
    py: Python<'_>,
    spec: Option<&Bound<'_, PyDict>>,
    id_prefix: &str,
) -> PyResult<Vec<PyEvent>> {
    let spec: DomainSpec = from_dict(py, spec)?;
    let events = py
        .detach(|| datagen::generate_domain(&spec, id_prefix))
        .map_err(to_py_err)?;
    Ok(events.into_iter().map(|inner| PyEvent { inner }).collect())
}

/// Target-domain spec dict obtained by shifting a source spec dict.
#[pyfunction]
#[pyo3(signature = (spec=None, shift=None))]
fn apply_shift<'py>(
    py: Python<'py>,
    spec: Option<&Bound<'py, PyDict>>,
    shift: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let spec: DomainSpec = from_dict(py, spec)?;
    let shift = match shift {
        Some(_) => from_dict::<ShiftSpec>(py, shift)?,
        None => ShiftSpec::shift_mid(),
    };
    spec.validate().map_err(to_py_err)?;
    shift.validate(spec.feature_dim).map_err(to_py_err)?;
    to_dict(py, &datagen::apply_shift(&spec, &shift))
}

#[pyfunction]
fn read_dataset(path: PathBuf) -> PyResult<Vec<PyEvent>> {
    let events = datagen::read_dataset(&path).map_err(to_py_err)?;
    Ok(events.into_iter().map(|inner| PyEvent { inner }).collect())
}

#[pyfunction]
fn write_dataset(events: Vec<PyEvent>, path: PathBuf) -> PyResult<()> {
    datagen::write_dataset(&unwrap_events(events), &path).map_err(to_py_err)
}

/// Trains on labelled events; `config` takes the fields of the `[train]`
/// config table.
#[pyfunction]
#[pyo3(signature = (events, config=None))]
fn train(
    py: Python<'_>,
    events: Vec<PyEvent>,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<PyModel> {
    let config: TrainConfig = from_dict(py, config)?;
    let train = pipeline::prepare(&unwrap_events(events), config.adjacency).map_err(to_py_err)?;
    let inner = py
        .detach(|| pipeline::train_phase(&train, &config))
        .map_err(to_py_err)?;
    Ok(PyModel { inner })
}

/// Hex digest identifying a config dict.
#[pyfunction]
fn config_fingerprint(py: Python<'_>, config: &Bound<'_, PyDict>) -> PyResult<String> {
    let value: serde_json::Value = from_dict::<serde_json::Map<_, _>>(py, Some(config))?.into();
    Ok(eval::config_fingerprint(&value))
}

#[pymodule]
fn tard_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvent>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_domain, m)?)?;
    m.add_function(wrap_pyfunction!(apply_shift, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(config_fingerprint, m)?)?;
    m.add("SWEEP_GRID", eval::SWEEP_GRID.to_vec())?;
    Ok(())
}
