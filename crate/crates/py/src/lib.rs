//! Python bindings. Matrices cross the boundary as lists of rows; configs
//! cross as JSON text with the same schema the CLI reads.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use greenkit::gp::{kl_sample_batch, Grid1D, KernelSpec};
use greenkit::linalg::{DenseMatrix, Matrix};
use greenkit::pde::{read_dataset, Dataset, DatasetManifest, OperatorSpec};
use greenkit::pipeline::{evaluate_kernel, extract_features, green_loss, train_green, FeatureThresholds, GreenModel, GreenTrainConfig};
use greenkit::rsvd::{randomized_svd as rsvd, verify_bound as verify, BoundParams, RsvdConfig};

type Rows = Vec<Vec<f64>>;

fn to_py(e: greenkit::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dense(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    DenseMatrix::from_row_major(r, c, rows.into_iter().flatten().collect()).map_err(to_py)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Parses JSON text with Python's `json` module into native objects.
fn loads(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn grid(n: usize, domain: (f64, f64)) -> PyResult<Arc<Grid1D>> {
    Ok(Arc::new(Grid1D::trapezoid(n, domain.0, domain.1).map_err(to_py)?))
}

/// Returns `(u, s, v, error)` with `u` of shape `m x (k + p)`.
#[pyfunction]
#[pyo3(signature = (a, k, p, seed, covariance=None))]
fn randomized_svd(
    a: Vec<Vec<f64>>,
    k: usize,
    p: usize,
    seed: u64,
    covariance: Option<Vec<Vec<f64>>>,
) -> PyResult<(Rows, Vec<f64>, Rows, f64)> {
    let a = dense(a)?;
    let c = covariance.map(dense).transpose()?;
    let r = rsvd(&a, &RsvdConfig::new(k, p, seed), c.as_ref()).map_err(to_py)?;
    Ok((rows(&r.svd.u), r.svd.singular_values, rows(&r.svd.v), r.achieved_error))
}

/// Monte Carlo check of the Frobenius error bound; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (a, k, p, trials, seed, t=2.0, u=2.0))]
#[allow(clippy::too_many_arguments)]
fn verify_bound(py: Python<'_>, a: Vec<Vec<f64>>, k: usize, p: usize, trials: usize, seed: u64, t: f64, u: f64) -> PyResult<Py<PyAny>> {
    let a = dense(a)?;
    let params = BoundParams::new(t, u).map_err(to_py)?;
    let report = verify(&a, &RsvdConfig::new(k, p, seed), &params, trials, None).map_err(to_py)?;
    loads(py, &serde_json::to_string(&report).map_err(json_err)?)
}

/// `n` KL samples; returns `(nodes, samples)` with one list per sample.
#[pyfunction]
fn gp_sample(kernel_json: &str, n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let spec: KernelSpec = serde_json::from_str(kernel_json).map_err(json_err)?;
    let kernel = spec.build().map_err(to_py)?;
    let q = kl_sample_batch(&kernel, n, seed);
    let cols = q.columns();
    let samples = (0..cols.ncols()).map(|j| cols.column(j).iter().copied().collect()).collect();
    Ok((kernel.grid().nodes().to_vec(), samples))
}

/// Discrete Green's function of an operator preset on an `n`-point grid.
#[pyfunction]
fn green_reference(operator_json: &str, n: usize) -> PyResult<Vec<Vec<f64>>> {
    let spec: OperatorSpec = serde_json::from_str(operator_json).map_err(json_err)?;
    let op = spec.build().map_err(to_py)?;
    let g = op.greens_reference(grid(n, op.domain())?).map_err(to_py)?;
    Ok(rows(g.kernel()))
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    greenkit::cli::run(std::iter::once("greenkit".to_string()).chain(args))
}

/// Forcing/solution pairs of one operator.
#[pyclass(name = "Dataset", module = "greenkit_py", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Generates from a manifest in JSON form.
    #[staticmethod]
    fn generate(manifest_json: &str) -> PyResult<Self> {
        let m: DatasetManifest = serde_json::from_str(manifest_json).map_err(json_err)?;
        Ok(PyDataset { inner: m.generate().map_err(to_py)? })
    }

    /// Reads a directory written by `gen-data`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset { inner: read_dataset(&path).map_err(to_py)?.1 })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn operator(&self) -> String {
        self.inner.operator.clone()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid.nodes().to_vec()
    }

    #[getter]
    fn sensors(&self) -> Vec<f64> {
        self.inner.sensor_grid.nodes().to_vec()
    }

    /// `(forcing, solution)` of pair `i`.
    fn pair(&self, i: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = self.inner.pairs.get(i).ok_or_else(|| PyValueError::new_err("pair index out of range"))?;
        Ok((p.forcing.values.clone(), p.solution.values.clone()))
    }
}

/// Learned Green's function and homogeneous term.
#[pyclass(name = "GreenModel", module = "greenkit_py", frozen)]
struct PyGreenModel {
    inner: GreenModel,
}

#[pymethods]
impl PyGreenModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGreenModel { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// `G` on an `n x n` trapezoid grid over the model's domain.
    fn kernel(&self, n: usize) -> PyResult<Vec<Vec<f64>>> {
        let op = evaluate_kernel(&self.inner, grid(n, self.inner.domain)?).map_err(to_py)?;
        Ok(rows(op.kernel()))
    }

    fn homogeneous(&self, xs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.homogeneous(&xs).map_err(to_py)
    }

    fn loss(&self, data: &PyDataset) -> PyResult<f64> {
        green_loss(&self.inner, &data.inner).map_err(to_py)
    }

    /// Feature report as a dict; `thresholds_json` overrides the defaults.
    #[pyo3(signature = (n=256, thresholds_json=None))]
    fn features(&self, py: Python<'_>, n: usize, thresholds_json: Option<&str>) -> PyResult<Py<PyAny>> {
        let th: FeatureThresholds = match thresholds_json {
            Some(t) => serde_json::from_str(t).map_err(json_err)?,
            None => FeatureThresholds::default(),
        };
        let r = extract_features(&self.inner, grid(n, self.inner.domain)?, &th).map_err(to_py)?;
        loads(py, &serde_json::to_string(&r).map_err(json_err)?)
    }
}

/// Trains on `data`; returns the model and the per-epoch loss history.
#[pyfunction]
#[pyo3(signature = (data, seed, config_json=None))]
fn train(py: Python<'_>, data: &PyDataset, seed: u64, config_json: Option<&str>) -> PyResult<(PyGreenModel, Vec<f64>)> {
    let cfg: GreenTrainConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(json_err)?,
        None => GreenTrainConfig::default(),
    };
    let (model, report) = py.detach(|| train_green(&data.inner, &cfg, seed, None)).map_err(to_py)?;
    Ok((PyGreenModel { inner: model }, report.loss_history))
}

#[pymodule]
pub fn greenkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(randomized_svd, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gp_sample, m)?)?;
    m.add_function(wrap_pyfunction!(green_reference, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyGreenModel>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
