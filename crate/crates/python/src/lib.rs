//! Python bindings. Configurations go in as dicts (or JSON strings) and
//! reports come back as plain dicts, so the Python side needs no schema.

use std::path::PathBuf;

use ::bpskit::bps::{EventKind, RefreshPolicy};
use ::bpskit::commands;
use ::bpskit::config::{EstimatorSpec, RunConfig, SamplingTarget};
use ::bpskit::diagnostics;
use ::bpskit::io;
use ::bpskit::targets::{Target as _, TargetConfig};
use ::bpskit::transform::{IsotropicTransform, TransformConfig, TransformedTarget};
use ::bpskit::{Error, Vector};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Corrupt(_) => PyOSError::new_err(e.to_string()),
        _ if e.exit_code() == 2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Accepts a dict or a JSON string and deserializes it.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.cast::<PyString>() {
        Ok(s) => s.to_str()?.to_owned(),
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn run_config(obj: &Bound<'_, PyAny>) -> PyResult<RunConfig> {
    let cfg: RunConfig = from_py(obj)?;
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn vector(x: Vec<f64>) -> Vector {
    Vector::from_vec(x)
}

/// A built-in potential, optionally pulled back through a tail transform.
#[pyclass(module = "bpskit", frozen)]
struct Target {
    inner: SamplingTarget,
}

#[pymethods]
impl Target {
    #[new]
    #[pyo3(signature = (config, transform=None))]
    fn new(config: &Bound<'_, PyAny>, transform: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let target: TargetConfig = from_py(config)?;
        let base = target.build().map_err(to_py)?;
        let inner = match transform {
            Some(t) => {
                let t: TransformConfig = from_py(t)?;
                SamplingTarget::Transformed(TransformedTarget::new(base, t.resolve(&target).map_err(to_py)?))
            }
            None => SamplingTarget::Plain(base),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn potential(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.potential(&vector(x)).map_err(to_py)
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.grad(&vector(x)).map_err(to_py)?.value.as_slice().to_vec())
    }

    /// Row-major nested lists; finite differences when no analytic form exists.
    fn hessian(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = ::bpskit::targets::hessian_or_fd(&self.inner, &vector(x)).map_err(to_py)?;
        Ok(h.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Doubled generator-to-Lyapunov ratio at `(x, v)` under `policy`.
    fn drift_ratio(&self, policy: &Bound<'_, PyAny>, x: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        let policy: RefreshPolicy = from_py(policy)?;
        diagnostics::drift_ratio(&self.inner, &policy, &vector(x), &vector(v)).map_err(to_py)
    }

    fn classify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let advice = diagnostics::classify_regime(&self.inner).map_err(to_py)?;
        Ok(to_dict(py, &advice)?.unbind())
    }
}

#[pyclass(module = "bpskit", frozen)]
struct Transform {
    inner: IsotropicTransform,
}

#[pymethods]
impl Transform {
    #[staticmethod]
    #[pyo3(signature = (b=1.0))]
    fn exponential(b: f64) -> PyResult<Self> {
        Ok(Self {
            inner: IsotropicTransform::exponential(b).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (p, radius=1.0))]
    fn polynomial(p: i32, radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: IsotropicTransform::polynomial(radius, p).map_err(to_py)?,
        })
    }

    fn apply(&self, y: Vec<f64>) -> Vec<f64> {
        self.inner.apply(&vector(y)).as_slice().to_vec()
    }

    fn invert(&self, x: Vec<f64>) -> Vec<f64> {
        self.inner.invert(&vector(x)).as_slice().to_vec()
    }

    /// `(log det J, gradient of log det J)` at `y`.
    fn log_det_jacobian(&self, y: Vec<f64>) -> (f64, Vec<f64>) {
        let (value, grad) = self.inner.log_det_jacobian(&vector(y));
        (value, grad.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Transform({:?})", self.inner)
    }
}

#[pyclass(module = "bpskit", frozen)]
struct Trajectory {
    inner: ::bpskit::bps::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_trajectory(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_trajectory(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.events.len()
    }

    #[getter]
    fn header(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        Ok(to_dict(py, &self.inner.header)?.unbind())
    }

    /// Event times, kinds, positions and velocities as four parallel lists.
    fn events(&self) -> (Vec<f64>, Vec<String>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let ev = &self.inner.events;
        let kind = |k: EventKind| {
            match k {
                EventKind::Init => "init",
                EventKind::Bounce => "bounce",
                EventKind::Refresh => "refresh",
                EventKind::Final => "final",
            }
            .to_owned()
        };
        (
            ev.iter().map(|e| e.t).collect(),
            ev.iter().map(|e| kind(e.kind)).collect(),
            ev.iter().map(|e| e.x.as_slice().to_vec()).collect(),
            ev.iter().map(|e| e.v.as_slice().to_vec()).collect(),
        )
    }

    fn position_at(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.position_at(t).map_err(to_py)?.as_slice().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(d={}, events={}, duration={})",
            self.inner.dim(),
            self.inner.events.len(),
            self.inner.duration
        )
    }
}

/// Runs every chain of `config` in memory.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn sample(py: Python<'_>, config: &Bound<'_, PyAny>, threads: Option<usize>) -> PyResult<Vec<Trajectory>> {
    let cfg = run_config(config)?;
    let runs = py.detach(|| commands::run_chains(&cfg, threads)).map_err(to_py)?;
    Ok(runs.into_iter().map(|inner| Trajectory { inner }).collect())
}

/// Same as the `sample` subcommand: chain files plus a manifest in `out`; returns the manifest.
#[pyfunction]
#[pyo3(signature = (config, out, threads=None))]
fn sample_to_dir(py: Python<'_>, config: &Bound<'_, PyAny>, out: PathBuf, threads: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg = run_config(config)?;
    let manifest = py.detach(|| commands::cmd_sample(&cfg, &out, threads)).map_err(to_py)?;
    Ok(to_dict(py, &manifest)?.unbind())
}

/// Pooled estimates; `estimators` is a list of `{"name", "terms"}` dicts, coordinate moments by default.
#[pyfunction]
#[pyo3(signature = (trajectories, estimators=None))]
fn estimate(
    py: Python<'_>,
    trajectories: Vec<PyRef<'_, Trajectory>>,
    estimators: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let runs: Vec<_> = trajectories.iter().map(|t| t.inner.clone()).collect();
    let specs: Vec<EstimatorSpec> = match estimators {
        Some(e) => from_py(e)?,
        None => EstimatorSpec::default_moments(runs.first().map_or(0, |t| t.dim())),
    };
    let report = commands::estimate_trajectories(&runs, &specs).map_err(to_py)?;
    Ok(to_dict(py, &report)?.unbind())
}

#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn diagnose(py: Python<'_>, config: &Bound<'_, PyAny>, threads: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg = run_config(config)?;
    let report = py.detach(|| commands::cmd_diagnose(&cfg, threads)).map_err(to_py)?;
    Ok(to_dict(py, &report)?.unbind())
}

#[pyfunction]
#[pyo3(signature = (seed=0))]
fn transform_check(py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
    let report = commands::cmd_transform_check(seed).map_err(to_py)?;
    Ok(to_dict(py, &report)?.unbind())
}

#[pyfunction]
fn angular_integral(u: f64, d: usize) -> f64 {
    diagnostics::angular_integral(u, d)
}

#[pyfunction]
fn gamma_d(d: usize) -> f64 {
    diagnostics::gamma_d(d)
}

#[pyfunction]
fn c_d(d: usize) -> f64 {
    diagnostics::c_d(d)
}

#[pymodule]
#[pyo3(name = "bpskit")]
fn bpskit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Target>()?;
    m.add_class::<Transform>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(sample_to_dir, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(transform_check, m)?)?;
    m.add_function(wrap_pyfunction!(angular_integral, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_d, m)?)?;
    m.add_function(wrap_pyfunction!(c_d, m)?)?;
    Ok(())
}
