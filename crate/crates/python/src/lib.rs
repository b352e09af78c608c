use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use tollcap::presets::{self, PresetParams};
use tollcap::{Cap, Error, Instance};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Hands a serializable result to Python as plain dicts and lists.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn cap(c: f64) -> PyResult<Cap> {
    Cap::new(c).map_err(to_py_err)
}

#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    /// Affine links from (a, b) pairs.
    #[staticmethod]
    #[pyo3(signature = (coeffs, demand = 1.0))]
    fn affine(coeffs: Vec<(f64, f64)>, demand: f64) -> PyResult<Self> {
        let inst = Instance::affine(&coeffs).map_err(to_py_err)?;
        let inner = Instance::with_demand(inst.links().to_vec(), demand).map_err(to_py_err)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Instance::from_json(text)
            .map(|inner| PyInstance { inner })
            .map_err(to_py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (name, a2 = None, a3 = None, n = None, d = None))]
    fn preset(
        name: &str,
        a2: Option<f64>,
        a3: Option<f64>,
        n: Option<usize>,
        d: Option<u32>,
    ) -> PyResult<Self> {
        presets::by_name(name, PresetParams { a2, a3, n, d })
            .map(|inner| PyInstance { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn demand(&self) -> f64 {
        self.inner.demand()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &tollcap::validate(&self.inner).map_err(to_py_err)?)
    }

    fn total_cost(&self, x: Vec<f64>) -> PyResult<f64> {
        tollcap::total_cost(&self.inner, &x).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, demand={})",
            self.inner.n(),
            self.inner.demand()
        )
    }
}

/// User equilibrium under the given tolls (all zero when omitted).
#[pyfunction]
#[pyo3(signature = (inst, tolls = None))]
fn wardrop<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    tolls: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let t = tolls.unwrap_or_else(|| vec![0.0; inst.inner.n()]);
    to_py(
        py,
        &tollcap::solve_wardrop(&inst.inner, &t).map_err(to_py_err)?,
    )
}

#[pyfunction]
fn optimal_flow<'py>(py: Python<'py>, inst: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &tollcap::optimal_flow(&inst.inner).map_err(to_py_err)?)
}

#[pyfunction]
#[pyo3(signature = (inst, cap = f64::INFINITY, grid_n = 2000, eps = 1e-6))]
fn spne<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    cap: f64,
    grid_n: usize,
    eps: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = self::cap(cap)?;
    let r = py
        .detach(|| tollcap::spne(&inst.inner, c, grid_n, eps))
        .map_err(to_py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (inst, cap, grid_n = 2000, eps = 1e-6))]
fn duopoly_search<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    cap: f64,
    grid_n: usize,
    eps: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = self::cap(cap)?;
    let r = py
        .detach(|| tollcap::duopoly_search(&inst.inner, c, grid_n, eps))
        .map_err(to_py_err)?;
    to_py(py, &r)
}

#[pyfunction]
fn optimal_cap<'py>(py: Python<'py>, inst: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &tollcap::optimal_cap(&inst.inner).map_err(to_py_err)?)
}

#[pyfunction]
#[pyo3(signature = (inst, tolls, cap = f64::INFINITY, eps = 1e-6, grid_n = 2000))]
fn verify<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    tolls: Vec<f64>,
    cap: f64,
    eps: f64,
    grid_n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let c = self::cap(cap)?;
    let v = py
        .detach(|| tollcap::verify_spne(&inst.inner, c, &tolls, eps, grid_n))
        .map_err(to_py_err)?;
    to_py(py, &v)
}

#[pyfunction]
fn efficiency_ratio<'py>(
    py: Python<'py>,
    inst: &PyInstance,
    cap: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = self::cap(cap)?;
    to_py(
        py,
        &tollcap::efficiency_ratio(&inst.inner, c).map_err(to_py_err)?,
    )
}

#[pyfunction]
fn bound_poly(d: u32) -> PyResult<f64> {
    tollcap::bound_poly(d).map_err(to_py_err)
}

#[pyfunction]
fn lower_bound_nonexistence(d: u32) -> PyResult<f64> {
    tollcap::lower_bound_nonexistence(d).map_err(to_py_err)
}

#[pymodule]
fn pytollcap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(wardrop, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_flow, m)?)?;
    m.add_function(wrap_pyfunction!(spne, m)?)?;
    m.add_function(wrap_pyfunction!(duopoly_search, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_cap, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(efficiency_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bound_poly, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_nonexistence, m)?)?;
    Ok(())
}
