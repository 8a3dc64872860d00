//! Python bindings for the `comp_oc` core crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ::comp_oc as core;
use core::features::{compute_features, DEFAULT_FEATURE_SAMPLES};
use core::ocp::{self, fixtures, OcpInstance, StageCost};
use core::oracle::OracleSolver;
use core::synth::{self, SynthesisPlan, UnrolledController, WIDTH_CEILING};
use core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidInstance(_) | Error::InvalidGraph(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into plain Python dicts and lists.
fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// An optimal control instance.
#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: OcpInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance {
            inner: OcpInstance::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// One of `example2`, `lq3`, `tanh_tracking`.
    #[staticmethod]
    fn fixture(name: &str) -> PyResult<Self> {
        let inner = match name {
            "example2" => fixtures::example2(),
            "lq3" => fixtures::lq3(),
            "tanh_tracking" => fixtures::tanh_tracking(2.0),
            other => return Err(PyValueError::new_err(format!("unknown fixture {other:?}"))),
        }
        .map_err(to_py)?;
        Ok(PyInstance { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn has_stage_cost(&self) -> bool {
        !matches!(self.inner.stage_cost, StageCost::Zero)
    }

    fn cost(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<f64> {
        self.inner.cost(&x, &u).map_err(to_py)
    }

    fn gradient(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<Vec<f64>> {
        ocp::grad_j(&self.inner, &x, &u).map_err(to_py)
    }

    fn hessian(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = ocp::hess_j(&self.inner, &x, &u).map_err(to_py)?;
        Ok(h.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    #[pyo3(signature = (n_samples = 64))]
    fn certify(&self, py: Python<'_>, n_samples: usize) -> PyResult<Py<PyAny>> {
        to_object(py, &ocp::certify_convexity(&self.inner, n_samples))
    }

    /// Folds the stage cost into an extra state coordinate.
    fn extend(&self) -> PyResult<Self> {
        Ok(PyInstance {
            inner: ocp::extend_system(&self.inner).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (margin = 1.25))]
    fn calibrate(&self, margin: f64) -> PyResult<Self> {
        let oracle = OracleSolver::auto(&self.inner);
        Ok(PyInstance {
            inner: ocp::calibrate_domain(&self.inner, &oracle, margin).map_err(to_py)?,
        })
    }

    /// Feature tuples of the dynamics and terminal-cost graphs.
    fn features(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let f = compute_features(&self.inner.dynamics_graph().map_err(to_py)?, DEFAULT_FEATURE_SAMPLES);
        let g = compute_features(&self.inner.terminal_cost, DEFAULT_FEATURE_SAMPLES);
        to_object(py, &serde_json::json!({ "f": f, "g": g }))
    }

    /// Optimal control sequence for the initial state `x`.
    fn solve(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        OracleSolver::auto(&self.inner).solve(&self.inner, &x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, q={}, horizon={}, stage_cost={})",
            self.inner.n,
            self.inner.q,
            self.inner.horizon,
            self.has_stage_cost()
        )
    }
}

/// Unrolled finite-difference descent on neural surrogates of the cost.
#[pyclass(name = "Controller", frozen)]
struct PyController {
    inner: UnrolledController,
    plan: SynthesisPlan,
    instance: OcpInstance,
}

#[pymethods]
impl PyController {
    /// Plans and builds a controller with weak error below `epsilon`. The
    /// instance must have a terminal cost only; call `extend()` first otherwise.
    #[staticmethod]
    #[pyo3(signature = (instance, epsilon, seed = 7, constant_samples = 16))]
    fn synthesize(instance: &PyInstance, epsilon: f64, seed: u64, constant_samples: usize) -> PyResult<Self> {
        let inst = &instance.inner;
        let ledger = synth::estimate_constants(inst, constant_samples).map_err(to_py)?;
        let consts = synth::surrogate_constants(inst, DEFAULT_FEATURE_SAMPLES).map_err(to_py)?;
        let plan = synth::plan_synthesis(&ledger, &consts, epsilon, WIDTH_CEILING).map_err(to_py)?;
        let inner = synth::build_controller(inst, &plan, seed).map_err(to_py)?;
        Ok(PyController {
            inner,
            plan,
            instance: inst.clone(),
        })
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.eval(&x).map_err(to_py)
    }

    #[getter]
    fn plan(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_object(py, &self.plan)
    }

    #[getter]
    fn total_size(&self) -> usize {
        self.inner.total_size
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    /// Weak error against the exact optimum on the given initial states.
    fn evaluate(&self, py: Python<'_>, states: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
        let oracle = OracleSolver::auto(&self.instance);
        let report = synth::evaluate_controller(&self.inner, &self.instance, &self.plan, &states, &oracle).map_err(to_py)?;
        to_object(py, &report)
    }
}

/// Runs the full pipeline from a config file and returns `(report, exit_code)`.
#[pyfunction]
fn run_config(py: Python<'_>, path: PathBuf) -> PyResult<(Py<PyAny>, i32)> {
    let cfg = core::cli::Config::load(&path).map_err(to_py)?;
    let inst = cfg.load_instance().map_err(to_py)?;
    let (report, outcome) = py.detach(|| core::cli::run_pipeline(&cfg, inst)).map_err(to_py)?;
    Ok((to_object(py, &report)?, outcome.exit_code()))
}

#[pymodule]
fn comp_oc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyController>()?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
