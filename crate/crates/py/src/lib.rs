//! Python bindings: `import achieve`.

use std::sync::OnceLock;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use achieve_core::constructor::{self, SolveConfig};
use achieve_core::prime_pool::{self, ExtractOptions, PoolHandle, Sieve, DEFAULT_HARD_CAP, DEFAULT_INITIAL_LIMIT};
use achieve_core::series_eval::{self, Enclosure};
use achieve_core::verify_oracle;
use achieve_core::Error;

create_exception!(achieve, CapacityError, PyRuntimeError);

fn sieve() -> &'static Sieve {
    static SIEVE: OnceLock<Sieve> = OnceLock::new();
    SIEVE.get_or_init(|| Sieve::new(DEFAULT_INITIAL_LIMIT, DEFAULT_HARD_CAP).expect("default sieve limits are valid"))
}

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Capacity { .. } | Error::EmptyWindow { .. } | Error::Refinement { .. } => {
            CapacityError::new_err(e.to_string())
        }
        Error::Witness(_) | Error::Postcondition(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Closed interval certified to contain an exact value.
#[pyclass(name = "Enclosure", frozen, skip_from_py_object, module = "achieve")]
#[derive(Clone, Copy)]
struct PyEnclosure {
    #[pyo3(get)]
    lo: f64,
    #[pyo3(get)]
    hi: f64,
}

impl From<Enclosure> for PyEnclosure {
    fn from(e: Enclosure) -> Self {
        PyEnclosure { lo: e.lo(), hi: e.hi() }
    }
}

#[pymethods]
impl PyEnclosure {
    #[new]
    fn new(lo: f64, hi: f64) -> PyResult<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(PyValueError::new_err(format!("bounds out of order: {lo} > {hi}")));
        }
        Ok(PyEnclosure { lo, hi })
    }

    fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn width(&self) -> f64 {
        Enclosure::new(self.lo, self.hi).width()
    }

    fn mid(&self) -> f64 {
        Enclosure::new(self.lo, self.hi).mid()
    }

    fn __repr__(&self) -> String {
        format!("Enclosure({:?}, {:?})", self.lo, self.hi)
    }
}

#[pyclass(name = "SolveReport", frozen, module = "achieve")]
struct PySolveReport {
    inner: constructor::SolveReport,
}

#[pymethods]
impl PySolveReport {
    #[getter]
    fn certified(&self) -> bool {
        self.inner.is_certified()
    }

    /// `"certified"` or the budget diagnostic.
    #[getter]
    fn status(&self) -> String {
        match &self.inner.status {
            constructor::SolveStatus::Certified => "certified".into(),
            constructor::SolveStatus::BudgetExhausted { diagnostic } => format!("budget_exhausted: {diagnostic}"),
        }
    }

    #[getter]
    fn indices(&self) -> Vec<u64> {
        self.inner.indices.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<PyEnclosure> {
        self.inner.residuals.iter().map(|&e| e.into()).collect()
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(status={:?}, indices={})",
            self.status(),
            self.inner.indices.len()
        )
    }
}

#[pyclass(name = "VerifyReport", frozen, module = "achieve")]
struct PyVerifyReport {
    inner: verify_oracle::VerifyReport,
}

#[pymethods]
impl PyVerifyReport {
    #[getter]
    fn passed(&self) -> bool {
        self.inner.pass
    }

    #[getter]
    fn sums(&self) -> Vec<f64> {
        self.inner.coordinates.iter().map(|c| c.sum).collect()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.inner.coordinates.iter().map(|c| c.residual).collect()
    }

    #[getter]
    fn duplicates(&self) -> Vec<u64> {
        self.inner.duplicates.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "VerifyReport(passed={}, n_terms={})",
            self.inner.pass, self.inner.n_terms
        )
    }
}

/// Finite index set `F` with `|c_i Σ_{n∈F} (-1)^{n+1} n^{-α_i} - target_i| <= tol`.
#[pyfunction]
#[pyo3(signature = (alphas, target, coeffs=None, tol=1e-6, max_index=10_000_000, budget_split=0.5, refinement_rounds=4, stage_cap=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    alphas: Vec<f64>,
    target: Vec<f64>,
    coeffs: Option<Vec<f64>>,
    tol: f64,
    max_index: u64,
    budget_split: f64,
    refinement_rounds: usize,
    stage_cap: Option<u64>,
) -> PyResult<PySolveReport> {
    let coeffs = coeffs.unwrap_or_else(|| vec![1.0; alphas.len()]);
    let cfg = SolveConfig {
        tol,
        max_index,
        budget_split,
        refinement_rounds,
        stage_index_cap: stage_cap,
        ..SolveConfig::default()
    };
    let inner = py
        .detach(|| constructor::solve(sieve(), &alphas, &coeffs, &target, &cfg))
        .map_err(to_py)?;
    Ok(PySolveReport { inner })
}

/// Independent re-summation of an index list against a target.
#[pyfunction]
#[pyo3(signature = (indices, alphas, target, tol, coeffs=None))]
fn verify(
    indices: Vec<u64>,
    alphas: Vec<f64>,
    target: Vec<f64>,
    tol: f64,
    coeffs: Option<Vec<f64>>,
) -> PyResult<PyVerifyReport> {
    let coeffs = coeffs.unwrap_or_else(|| vec![1.0; alphas.len()]);
    let inner = verify_oracle::verify_with(&indices, &alphas, &coeffs, &target, tol).map_err(to_py)?;
    Ok(PyVerifyReport { inner })
}

/// Every prime up to `limit`, ascending.
#[pyfunction]
fn sieve_primes(py: Python<'_>, limit: u64) -> PyResult<Vec<u64>> {
    py.detach(|| prime_pool::sieve_primes(sieve(), limit)).map_err(to_py)
}

/// First `count` elements of the corridor sequence with ratios in
/// `(1 + delta/3, 1 + delta]` drawn from the odd primes from `start` on.
#[pyfunction]
#[pyo3(signature = (delta, start=3, count=10))]
fn extract_edelta(delta: f64, start: u64, count: usize) -> PyResult<Vec<u64>> {
    let seq = prime_pool::extract_edelta(sieve(), &PoolHandle::base(), delta, start, ExtractOptions::default())
        .map_err(to_py)?;
    seq.first_elements(sieve(), count).map_err(to_py)
}

/// Enclosure of `Σ_{n∈indices} (-1)^{n+1} n^{-alpha}`.
#[pyfunction]
fn phi(indices: Vec<u64>, alpha: f64) -> PyResult<PyEnclosure> {
    let mut v = indices;
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) || v.first() == Some(&0) {
        return Err(PyValueError::new_err("indices must be distinct positive integers"));
    }
    Ok(series_eval::phi_finite(&v, alpha).into())
}

/// Optimal subset of `magnitudes` for `target`: `(residual, positions)`.
#[pyfunction]
fn subset_oracle(magnitudes: Vec<f64>, target: f64) -> PyResult<(f64, Vec<usize>)> {
    let r = verify_oracle::brute_subset_oracle(&magnitudes, target).map_err(to_py)?;
    Ok((r.residual, r.subset))
}

/// Oracle residuals over an even grid of `[0, Σ magnitudes]`: `[(target, residual)]`.
#[pyfunction]
#[pyo3(signature = (magnitudes, grid=64))]
fn achievement_profile(magnitudes: Vec<f64>, grid: usize) -> PyResult<Vec<(f64, f64)>> {
    let p = verify_oracle::achievement_profile(&magnitudes, grid).map_err(to_py)?;
    Ok(p.rows.iter().map(|r| (r.target, r.residual)).collect())
}

#[pymodule]
fn achieve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    m.add_class::<PyEnclosure>()?;
    m.add_class::<PySolveReport>()?;
    m.add_class::<PyVerifyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(sieve_primes, m)?)?;
    m.add_function(wrap_pyfunction!(extract_edelta, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(subset_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(achievement_profile, m)?)?;
    Ok(())
}
