use chcon::bounds::{self, CapacityBracket, SearchConfig, UpperSource};
use chcon::contraction::{self, SearchOptions};
use chcon::decompose::{self, P2Options};
use chcon::entanglement::{self, BipartiteState, SepOptions};
use chcon::linalg::CMatrix;
use chcon::simulator::{doubled_memory_experiment as run_doubled, DoubledOptions};
use chcon::verify::{run_suite, Suite, VerifyOptions};
use chcon::{ChannelSpec, KrausChannel};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

type PyMatrix = Vec<Vec<Complex64>>;

fn err(e: chcon::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes a report and hands it to Python's `json.loads`.
fn to_py<'py>(py: Python<'py>, x: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn to_matrix(rows: &PyMatrix) -> PyResult<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix must be a non-empty rectangular list of rows"));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> PyMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// A completely positive trace-preserving map given by Kraus operators.
#[pyclass(name = "Channel", module = "chcon_py", frozen)]
struct PyChannel {
    inner: KrausChannel,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(kraus: Vec<PyMatrix>) -> PyResult<Self> {
        let ops = kraus.iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: KrausChannel::new(ops).map_err(err)? })
    }

    /// `identity`, `depolarizing`, `dephasing` or `amplitude_damping`.
    #[staticmethod]
    #[pyo3(signature = (name, p=None))]
    fn preset(name: &str, p: Option<f64>) -> PyResult<Self> {
        let spec = serde_json::json!({ "preset": name, "p": p });
        Self::from_json(&spec.to_string())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let ch = ChannelSpec::from_json(text).and_then(|s| s.to_channel()).map_err(err)?;
        Ok(Self { inner: ch })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&ChannelSpec::from_channel(&self.inner)).expect("channel serializes")
    }

    #[getter]
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }

    #[getter]
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }

    fn kraus(&self) -> Vec<PyMatrix> {
        self.inner.kraus().iter().map(from_matrix).collect()
    }

    fn apply(&self, rho: PyMatrix) -> PyResult<PyMatrix> {
        let m = to_matrix(&rho)?;
        if m.nrows() != self.inner.in_dim() || m.ncols() != self.inner.in_dim() {
            return Err(PyValueError::new_err(format!("input must be {0}x{0}", self.inner.in_dim())));
        }
        Ok(from_matrix(&self.inner.apply(&m)))
    }

    fn choi_eigenvalues(&self) -> Vec<f64> {
        self.inner.choi().eigenvalues()
    }

    #[pyo3(signature = (tol=1e-9))]
    fn is_unital(&self, tol: f64) -> bool {
        self.inner.is_unital(tol)
    }

    #[pyo3(signature = (tol=1e-9))]
    fn is_unitary(&self, tol: f64) -> bool {
        self.inner.is_unitary(tol)
    }

    fn tensor(&self, other: &PyChannel) -> Self {
        Self { inner: self.inner.tensor(&other.inner) }
    }

    fn __repr__(&self) -> String {
        format!("Channel(in_dim={}, out_dim={}, kraus={})", self.inner.in_dim(), self.inner.out_dim(), self.inner.kraus().len())
    }
}

fn search(seed: u64, restarts: usize) -> SearchOptions {
    SearchOptions { seed, restarts, ..SearchOptions::default() }
}

#[pyfunction]
#[pyo3(signature = (ch, seed=0, restarts=64))]
fn eta_tr<'py>(py: Python<'py>, ch: &PyChannel, seed: u64, restarts: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &contraction::eta_tr(&ch.inner, &search(seed, restarts)).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (ch, seed=0, restarts=64))]
fn eta_tr_upper_minoutev<'py>(py: Python<'py>, ch: &PyChannel, seed: u64, restarts: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &contraction::eta_tr_upper_minoutev(&ch.inner, &search(seed, restarts)).map_err(err)?)
}

#[pyfunction]
fn eta_tr_upper_choi<'py>(py: Python<'py>, ch: &PyChannel) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &contraction::eta_tr_upper_choi(&ch.inner).map_err(err)?)
}

/// `‖ρ − σ‖₁`, ranging over `[0, 2]`.
#[pyfunction]
fn trace_distance(rho: PyMatrix, sigma: PyMatrix) -> PyResult<f64> {
    let a = chcon::DensityState::new(to_matrix(&rho)?).map_err(err)?;
    let b = chcon::DensityState::new(to_matrix(&sigma)?).map_err(err)?;
    contraction::trace_distance(&a, &b).map_err(err)
}

#[pyfunction]
fn unital_split<'py>(py: Python<'py>, ch: &PyChannel) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &decompose::unital_split(&ch.inner).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (ch, seed=0))]
fn p_constant<'py>(py: Python<'py>, ch: &PyChannel, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &decompose::p_constant(&ch.inner, &P2Options { seed, ..P2Options::default() }).map_err(err)?)
}

fn bipartite(rho: &PyMatrix, dim_a: usize, dim_b: usize) -> PyResult<BipartiteState> {
    BipartiteState::from_matrix(to_matrix(rho)?, dim_a, dim_b).map_err(err)
}

/// χ² divergence to the separable (PPT) states.
#[pyfunction]
fn chisep<'py>(py: Python<'py>, rho: PyMatrix, dim_a: usize, dim_b: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &entanglement::chisep(&bipartite(&rho, dim_a, dim_b)?, &SepOptions::default()).map_err(err)?)
}

/// Trace distance to the separable (PPT) states.
#[pyfunction]
fn dsep<'py>(py: Python<'py>, rho: PyMatrix, dim_a: usize, dim_b: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &entanglement::dsep(&bipartite(&rho, dim_a, dim_b)?, &SepOptions::default()).map_err(err)?)
}

#[pyfunction]
fn memory_time_bound<'py>(py: Python<'py>, n: u32, p: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &bounds::memory_time_bound_from_p(n, p).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (ch, user_upper=None, seed=0))]
fn capacity_bracket<'py>(py: Python<'py>, ch: &PyChannel, user_upper: Option<f64>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SearchConfig { seed, ..SearchConfig::default() };
    to_py(py, &bounds::capacity_bracket(&ch.inner, user_upper, &cfg).map_err(err)?)
}

/// Overhead bound from `p` and an optional capacity upper bound (trivial bound 1 otherwise).
#[pyfunction]
#[pyo3(signature = (n, t, p, capacity_upper=None))]
fn overhead_lower_bound<'py>(py: Python<'py>, n: u64, t: f64, p: f64, capacity_upper: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let mut bracket = CapacityBracket::trivial();
    if let Some(u) = capacity_upper {
        bracket.upper = u;
        bracket.upper_source = UpperSource::User;
    }
    to_py(py, &bounds::overhead_lower_bound(n, t, p, &bracket).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (noise, steps=10, seed=0))]
fn doubled_memory_experiment<'py>(py: Python<'py>, noise: &PyChannel, steps: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let mut opts = DoubledOptions::default();
    opts.sim.seed = seed;
    opts.p2.seed = seed;
    let rep = run_doubled(1, &noise.inner, steps, None, &BipartiteState::bell(), &opts).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (suite, seed=0, trials=None))]
fn verify<'py>(py: Python<'py>, suite: &str, seed: u64, trials: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let s: Suite = suite.parse().map_err(err)?;
    let report = py.detach(|| run_suite(s, &VerifyOptions { trials, ..VerifyOptions::with_seed(seed) }));
    to_py(py, &report)
}

#[pymodule]
fn chcon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(eta_tr, m)?)?;
    m.add_function(wrap_pyfunction!(eta_tr_upper_minoutev, m)?)?;
    m.add_function(wrap_pyfunction!(eta_tr_upper_choi, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(unital_split, m)?)?;
    m.add_function(wrap_pyfunction!(p_constant, m)?)?;
    m.add_function(wrap_pyfunction!(chisep, m)?)?;
    m.add_function(wrap_pyfunction!(dsep, m)?)?;
    m.add_function(wrap_pyfunction!(memory_time_bound, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(doubled_memory_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
