//! Python bindings. Tensors cross the boundary as a dims list plus flat
//! column-major data (mode 0 fastest), matching `numpy.ravel(order="F")`.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tucker_core::bounds::{self, BoundParams};
use tucker_core::testbed::{self, Decay};
use tucker_core::{Algorithm, DenseTensor, Matrix, SketchFamily, SolverConfig, TuckerError};

fn py_err(e: TuckerError) -> PyErr {
    match e {
        TuckerError::Io(_) | TuckerError::Format(_) => PyIOError::new_err(e.to_string()),
        TuckerError::SvdFailed | TuckerError::NonFinite | TuckerError::ZeroNorm => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| PyValueError::new_err(format!("bad {what} {s:?}: {e}")))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Dense real tensor.
#[pyclass(name = "Tensor", module = "tucker", frozen)]
pub struct PyTensor {
    inner: DenseTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(dims: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: DenseTensor::new(dims, data).map_err(py_err)? })
    }

    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: DenseTensor::zeros(dims).map_err(py_err)? })
    }

    /// Inverse of `unfold`.
    #[staticmethod]
    fn fold(matrix: Vec<Vec<f64>>, mode: usize, dims: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: DenseTensor::fold(&from_rows(&matrix)?, mode, &dims).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: tucker_core::io::load_tensor(path).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        tucker_core::io::save_tensor(path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    /// Flat column-major data.
    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, index: Vec<usize>) -> PyResult<f64> {
        self.inner.get(&index).map_err(py_err)
    }

    /// Mode-`k` unfolding as a list of rows.
    fn unfold(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.unfold(mode).map_err(py_err)?))
    }

    /// Mode-`k` product with a matrix given as rows.
    fn mode_product(&self, matrix: Vec<Vec<f64>>, mode: usize) -> PyResult<Self> {
        Ok(Self { inner: self.inner.mode_product(&from_rows(&matrix)?, mode).map_err(py_err)? })
    }

    fn norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn __sub__(&self, other: &PyTensor) -> PyResult<Self> {
        Ok(Self { inner: self.inner.sub(&other.inner).map_err(py_err)? })
    }

    fn __eq__(&self, other: &PyTensor) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Tensor(dims={:?}, norm={:e})", self.inner.dims(), self.inner.frobenius_norm())
    }
}

/// Result of one solver run.
#[pyclass(name = "Solution", module = "tucker", frozen)]
pub struct PySolution {
    solution: tucker_core::Solution,
    config: SolverConfig,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.solution.algorithm.name()
    }

    #[getter]
    fn core(&self) -> PyTensor {
        PyTensor { inner: self.solution.factorization.core.clone() }
    }

    /// Factor matrices, each a list of rows.
    #[getter]
    fn factors(&self) -> Vec<Vec<Vec<f64>>> {
        self.solution.factorization.factors.iter().map(rows).collect()
    }

    #[getter]
    fn ranks(&self) -> Vec<usize> {
        self.solution.factorization.ranks().to_vec()
    }

    /// Power iterations performed per mode.
    #[getter]
    fn powers(&self) -> Vec<usize> {
        self.solution.powers.clone()
    }

    #[getter]
    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("mm", self.solution.counters.mm)?;
        d.set_item("svd", self.solution.counters.svd)?;
        Ok(d)
    }

    /// Shifts used in mode `mode`, one per power iteration.
    fn alphas(&self, mode: usize) -> Vec<f64> {
        self.solution.trace.alphas(mode)
    }

    #[getter]
    fn final_alpha(&self) -> Option<f64> {
        self.solution.trace.last_final_alpha()
    }

    fn reconstruct(&self) -> PyResult<PyTensor> {
        Ok(PyTensor { inner: self.solution.factorization.reconstruct().map_err(py_err)? })
    }

    fn relative_error(&self, tensor: &PyTensor) -> PyResult<f64> {
        tucker_core::relative_error(&tensor.inner, &self.solution.factorization).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Solution(algorithm={:?}, ranks={:?}, powers={:?})", self.algorithm(), self.ranks(), self.powers())
    }
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    ranks: Vec<usize>,
    oversampling: usize,
    power: usize,
    pve_tol: Option<f64>,
    q_max: usize,
    order: Option<Vec<usize>>,
    sketch: &str,
    seed: u64,
) -> PyResult<SolverConfig> {
    let mut cfg = SolverConfig::new(ranks)
        .with_oversampling(oversampling)
        .with_power(power)
        .with_sketch(parse::<SketchFamily>(sketch, "sketch family")?)
        .with_seed(seed);
    if let Some(tol) = pve_tol {
        cfg = cfg.with_pve(tol, q_max);
    }
    if let Some(order) = order {
        cfg = cfg.with_order(order);
    }
    Ok(cfg)
}

/// Runs one Tucker solver. `order` is 0-based; `pve_tol` switches to the
/// adaptive power schedule.
#[pyfunction]
#[pyo3(signature = (algorithm, tensor, ranks, oversampling=10, power=1, pve_tol=None, q_max=10_000, order=None, sketch="gaussian", seed=0))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    algorithm: &str,
    tensor: &PyTensor,
    ranks: Vec<usize>,
    oversampling: usize,
    power: usize,
    pve_tol: Option<f64>,
    q_max: usize,
    order: Option<Vec<usize>>,
    sketch: &str,
    seed: u64,
) -> PyResult<PySolution> {
    let alg = parse::<Algorithm>(algorithm, "algorithm")?;
    let mut config = build_config(ranks, oversampling, power, pve_tol, q_max, order, sketch, seed)?;
    if alg == Algorithm::Pve && pve_tol.is_none() {
        config = config.with_pve(0.5, q_max);
    }
    let solution = py.detach(|| tucker_core::solve(alg, &tensor.inner, &config)).map_err(py_err)?;
    Ok(PySolution { solution, config })
}

/// Probabilistic error bound for a randomized run; returns a dict with
/// `bound`, `failure_sum`, `probability`, `observed_error` and `holds`.
#[pyfunction]
#[pyo3(signature = (tensor, solution, j=None, beta=2.0, gamma=2.0))]
fn error_bound<'py>(
    py: Python<'py>,
    tensor: &PyTensor,
    solution: &PySolution,
    j: Option<usize>,
    beta: f64,
    gamma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let alg = solution.solution.algorithm;
    if !alg.is_randomized() || matches!(alg, Algorithm::Holistic | Algorithm::HolisticShifted) {
        return Err(PyValueError::new_err(format!("no error bound for {alg}")));
    }
    let params = BoundParams::from_run(&tensor.inner, &solution.config, &solution.solution.trace)
        .map_err(py_err)?
        .with_knobs(j, beta, gamma);
    let report = if alg.is_t_family() {
        bounds::thosvd_error_bound(&params)
    } else {
        bounds::sthosvd_error_bound(&params)
    }
    .map_err(py_err)?;
    let observed = tensor
        .inner
        .sub(&solution.solution.factorization.reconstruct().map_err(py_err)?)
        .map_err(py_err)?
        .frobenius_norm();
    let d = PyDict::new(py);
    d.set_item("bound", report.bound)?;
    d.set_item("failure_sum", report.failure_sum)?;
    d.set_item("probability", report.probability)?;
    d.set_item("observed_error", observed)?;
    d.set_item("holds", observed <= report.bound)?;
    Ok(d)
}

/// Names accepted by `solve`.
#[pyfunction]
fn algorithms() -> Vec<&'static str> {
    Algorithm::ALL.iter().map(|a| a.name()).collect()
}

#[pyfunction]
#[pyo3(signature = (n, seed, n_terms_big=testbed::DEFAULT_TERMS_BIG, gamma=testbed::DEFAULT_GAMMA, sparsity=testbed::DEFAULT_SPARSITY))]
fn gen_tensor_a(n: usize, seed: u64, n_terms_big: usize, gamma: f64, sparsity: f64) -> PyResult<PyTensor> {
    Ok(PyTensor { inner: testbed::gen_tensor_a(n, n_terms_big, gamma, sparsity, seed).map_err(py_err)? })
}

/// `decay` is one of `slow`, `fast`, `s-shape`.
#[pyfunction]
fn gen_tensor_b(n: usize, decay: &str, seed: u64) -> PyResult<PyTensor> {
    let decay = parse::<Decay>(decay, "decay")?;
    Ok(PyTensor { inner: testbed::gen_tensor_b(n, decay, seed).map_err(py_err)? })
}

#[pyfunction]
fn gen_tensor_c(dims: [usize; 3], seed: u64) -> PyResult<PyTensor> {
    Ok(PyTensor { inner: testbed::gen_tensor_c(dims, seed).map_err(py_err)? })
}

#[pyfunction]
fn gen_exact_rank(dims: Vec<usize>, ranks: Vec<usize>, seed: u64) -> PyResult<PyTensor> {
    Ok(PyTensor { inner: testbed::gen_exact_rank(&dims, &ranks, seed).map_err(py_err)? })
}

#[pymodule]
fn tucker(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(algorithms, m)?)?;
    m.add_function(wrap_pyfunction!(gen_tensor_a, m)?)?;
    m.add_function(wrap_pyfunction!(gen_tensor_b, m)?)?;
    m.add_function(wrap_pyfunction!(gen_tensor_c, m)?)?;
    m.add_function(wrap_pyfunction!(gen_exact_rank, m)?)?;
    Ok(())
}
