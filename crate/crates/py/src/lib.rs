//! Python bindings for the `mixedfs` toolkit.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mixedfs::czdecomp::{self, verify_decomposition};
use mixedfs::czo::{self, KernelSpec};
use mixedfs::harness::{self, ExperimentConfig};
use mixedfs::orlicz::{self, LuxemburgQuery};
use mixedfs::weights::{self, WeightClass};
use mixedfs::{DyadicCube, Family, Grid, SampledFunction, YoungSpec};

fn err(e: mixedfs::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pair(c: DyadicCube) -> (u32, usize) {
    (c.level, c.index)
}

#[pyclass(name = "Grid", module = "mixedfs_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (lo, hi, levels))]
    fn new(lo: f64, hi: f64, levels: u32) -> PyResult<Self> {
        Grid::new(lo, hi, levels).map(|inner| PyGrid { inner }).map_err(err)
    }

    #[getter]
    fn lo(&self) -> f64 {
        self.inner.lo()
    }

    #[getter]
    fn hi(&self) -> f64 {
        self.inner.hi()
    }

    #[getter]
    fn levels(&self) -> u32 {
        self.inner.levels()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn midpoints(&self) -> Vec<f64> {
        self.inner.midpoints()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}, {}, levels={})", self.inner.lo(), self.inner.hi(), self.inner.levels())
    }
}

/// Cell values of a function on a grid.
#[pyclass(name = "SampledFunction", module = "mixedfs_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySampled {
    inner: SampledFunction,
}

#[pymethods]
impl PySampled {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        SampledFunction::new(grid.inner, values).map(|inner| PySampled { inner }).map_err(err)
    }

    /// Samples a named family such as `"indicator:0,0.25"` or `"power:0.5,0"`.
    #[staticmethod]
    fn family(grid: &PyGrid, spec: &str) -> PyResult<Self> {
        let fam: Family = spec.parse().map_err(err)?;
        fam.sample(&grid.inner).map(|inner| PySampled { inner }).map_err(err)
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, c: f64) -> PyResult<Self> {
        SampledFunction::constant(grid.inner, c).map(|inner| PySampled { inner }).map_err(err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: *self.inner.grid() }
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn integral_against(&self, w: &PySampled) -> PyResult<f64> {
        self.inner.integral_against(&w.inner).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "YoungSpec", module = "mixedfs_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyYoung {
    inner: YoungSpec,
}

#[pymethods]
impl PyYoung {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(|inner| PyYoung { inner }).map_err(err)
    }

    fn __call__(&self, t: f64) -> PyResult<f64> {
        self.inner.eval(t).map_err(err)
    }

    fn inverse(&self, y: f64) -> PyResult<f64> {
        self.inner.inverse(y).map_err(err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("YoungSpec('{}')", self.inner)
    }
}

/// Luxemburg average of `f` on the dyadic cube `(level, index)`.
#[pyfunction]
#[pyo3(signature = (f, w, phi, cube = (0, 0)))]
fn luxemburg(f: &PySampled, w: &PySampled, phi: &PyYoung, cube: (u32, usize)) -> PyResult<f64> {
    let cube = DyadicCube::new(cube.0, cube.1);
    orlicz::luxemburg(&LuxemburgQuery::new(&f.inner, &w.inner, cube, &phi.inner)).map_err(err)
}

#[pyfunction]
fn maximal(py: Python<'_>, f: &PySampled, w: &PySampled, phi: &PyYoung) -> PyResult<PySampled> {
    py.detach(|| orlicz::maximal(&f.inner, &w.inner, &phi.inner)).map(|inner| PySampled { inner }).map_err(err)
}

#[pyfunction]
fn iterated_maximal(py: Python<'_>, f: &PySampled, w: &PySampled, k: u32) -> PyResult<PySampled> {
    py.detach(|| orlicz::iterated_maximal(&f.inner, &w.inner, k)).map(|inner| PySampled { inner }).map_err(err)
}

/// Constant of `w` for a class name such as `"A2"`, `"RHinf"` or `"BMO"`.
#[pyfunction]
#[pyo3(signature = (w, class_name, base = None))]
fn weight_constant<'py>(
    py: Python<'py>,
    w: &PySampled,
    class_name: &str,
    base: Option<&PySampled>,
) -> PyResult<Bound<'py, PyDict>> {
    let class: WeightClass = class_name.parse().map_err(err)?;
    let report = weights::weight_constant(&w.inner, class, base.map(|b| &b.inner)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("class", report.class_name.to_string())?;
    d.set_item("constant", report.constant)?;
    d.set_item("witness", pair(report.witness_cube))?;
    Ok(d)
}

/// Weighted CZ decomposition of `f` at level `lam`, with its verification.
#[pyfunction]
fn cz_decompose<'py>(py: Python<'py>, f: &PySampled, v: &PySampled, lam: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = czdecomp::cz_decompose(&f.inner, &v.inner, lam).map_err(err)?;
    let report = verify_decomposition(&d, &f.inner, &v.inner).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("cubes", d.cubes.iter().map(|&c| pair(c)).collect::<Vec<_>>())?;
    out.set_item("weighted_averages", &d.weighted_averages)?;
    out.set_item("good", d.good.values().to_vec())?;
    out.set_item("bad", d.bad_sum())?;
    out.set_item("omega", &d.omega)?;
    out.set_item("omega_star", &d.omega_star)?;
    out.set_item("doubling_constant", d.doubling_constant)?;
    out.set_item("root_selected", d.root_selected)?;
    let props = PyDict::new(py);
    for p in &report.properties {
        props.set_item(&p.name, p.pass)?;
    }
    out.set_item("properties", props)?;
    out.set_item("passed", report.all_pass())?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (f, truncation = 1))]
fn apply_czo(py: Python<'_>, f: &PySampled, truncation: usize) -> PyResult<PySampled> {
    py.detach(|| czo::apply_czo(&f.inner, &KernelSpec::hilbert(truncation))).map(|inner| PySampled { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, b, m, truncation = 1))]
fn commutator(py: Python<'_>, f: &PySampled, b: &PySampled, m: u32, truncation: usize) -> PyResult<PySampled> {
    py.detach(|| czo::commutator(&f.inner, &b.inner, m, &KernelSpec::hilbert(truncation)))
        .map(|inner| PySampled { inner })
        .map_err(err)
}

/// Runs an experiment config given as JSON text and returns the report as JSON text.
#[pyfunction]
fn run_config(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    py.detach(|| harness::run(&cfg)).map(|r| r.to_json()).map_err(err)
}

#[pymodule]
pub fn mixedfs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PySampled>()?;
    m.add_class::<PyYoung>()?;
    m.add_function(wrap_pyfunction!(luxemburg, m)?)?;
    m.add_function(wrap_pyfunction!(maximal, m)?)?;
    m.add_function(wrap_pyfunction!(iterated_maximal, m)?)?;
    m.add_function(wrap_pyfunction!(weight_constant, m)?)?;
    m.add_function(wrap_pyfunction!(cz_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(apply_czo, m)?)?;
    m.add_function(wrap_pyfunction!(commutator, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
