//! Python bindings: series construction, the two fits, both score tests and
//! simulation from the latent AR(1) model.

use binlat_core::glm;
use binlat_core::latent_test::{default_grid, standard_latent_test, sup_latent_test};
use binlat_core::marginal::{self, MarginalOptions};
use binlat_core::numerics::{RandomSource, DEFAULT_NODES};
use binlat_core::serial_test::serial_dependence_test;
use binlat_core::simulation::{simulate_series, DgpSpec, LatentScaling, LatentSpec};
use binlat_core::{Error, ObservationSeries};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(binlat, BinlatError, PyException, "Estimation or testing failed.");
create_exception!(
    binlat,
    DegenerateError,
    BinlatError,
    "The statistic is undefined for these data (pile-up or zero variance)."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_)
        | Error::InvalidSeries(_)
        | Error::InvalidKernel(_)
        | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        e if e.is_statistical_degeneracy() => DegenerateError::new_err(e.to_string()),
        e => BinlatError::new_err(e.to_string()),
    }
}

/// Binomial counts `y` out of `m` with one regressor row per time point.
#[pyclass(name = "Series", module = "binlat", frozen)]
pub struct PySeries {
    inner: ObservationSeries,
}

#[pymethods]
impl PySeries {
    #[new]
    fn new(y: Vec<u32>, m: Vec<u32>, x: Vec<Vec<f64>>) -> PyResult<Self> {
        ObservationSeries::new(y, m, x)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    #[getter]
    fn y(&self) -> Vec<u32> {
        self.inner.y().to_vec()
    }

    #[getter]
    fn m(&self) -> Vec<u32> {
        self.inner.m().to_vec()
    }

    /// Regressor rows.
    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Series(n={}, r={})", self.inner.n(), self.inner.r())
    }
}

#[pyclass(name = "GlmFit", module = "binlat", frozen, get_all)]
pub struct PyGlmFit {
    beta_hat: Vec<f64>,
    std_errors: Vec<f64>,
    loglik: f64,
    converged: bool,
    separated: bool,
    iterations: usize,
}

#[pymethods]
impl PyGlmFit {
    fn __repr__(&self) -> String {
        format!("GlmFit(beta_hat={:?}, loglik={:.4})", self.beta_hat, self.loglik)
    }
}

/// Marginal fit of `(β, τ)`; pass it to [`test_serial`].
#[pyclass(name = "MarginalFit", module = "binlat", frozen)]
pub struct PyMarginalFit {
    inner: marginal::MarginalFit,
}

#[pymethods]
impl PyMarginalFit {
    #[getter]
    fn beta_hat(&self) -> Vec<f64> {
        self.inner.beta_hat.clone()
    }
    #[getter]
    fn tau_hat(&self) -> f64 {
        self.inner.tau_hat
    }
    #[getter]
    fn pile_up(&self) -> bool {
        self.inner.pile_up
    }
    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    /// `None` when the Hessian is not negative definite.
    #[getter]
    fn std_errors(&self) -> Option<Vec<f64>> {
        self.inner.std_errors.clone()
    }
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }
    #[getter]
    fn eu2(&self) -> Vec<f64> {
        self.inner.eu2.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarginalFit(beta_hat={:?}, tau_hat={:.4}, pile_up={})",
            self.inner.beta_hat, self.inner.tau_hat, self.inner.pile_up
        )
    }
}

#[pyclass(name = "LatentTest", module = "binlat", frozen, get_all)]
pub struct PyLatentTest {
    standard_statistic: f64,
    standard_p_value: f64,
    sup_statistic: f64,
    argmax_psi: f64,
    p_value_davies: f64,
    grid: Vec<f64>,
    per_psi: Vec<f64>,
    dropped: Vec<f64>,
}

#[pymethods]
impl PyLatentTest {
    fn __repr__(&self) -> String {
        format!(
            "LatentTest(standard={:.4}, sup={:.4} at psi={}, p_davies={:.4})",
            self.standard_statistic, self.sup_statistic, self.argmax_psi, self.p_value_davies
        )
    }
}

#[pyclass(name = "SerialTest", module = "binlat", frozen, get_all)]
pub struct PySerialTest {
    statistic: f64,
    p_value: f64,
    lags: usize,
    scores: Vec<f64>,
    omegas: Vec<f64>,
}

#[pymethods]
impl PySerialTest {
    fn __repr__(&self) -> String {
        format!(
            "SerialTest(statistic={:.4}, p_value={:.4}, lags={})",
            self.statistic, self.p_value, self.lags
        )
    }
}

/// Logistic regression ignoring the latent process.
#[pyfunction]
fn fit_glm(py: Python<'_>, series: &PySeries) -> PyResult<PyGlmFit> {
    let fit = py.detach(|| glm::fit_glm(&series.inner)).map_err(to_py)?;
    Ok(PyGlmFit {
        beta_hat: fit.beta_hat,
        std_errors: fit.std_errors,
        loglik: fit.loglik,
        converged: fit.converged,
        separated: fit.separated,
        iterations: fit.iterations,
    })
}

/// Marginal likelihood fit with i.i.d. `N(0, τ)` latent effects.
#[pyfunction]
#[pyo3(signature = (series, nodes = DEFAULT_NODES))]
fn fit_marginal(py: Python<'_>, series: &PySeries, nodes: usize) -> PyResult<PyMarginalFit> {
    let opts = MarginalOptions {
        nodes,
        ..MarginalOptions::default()
    };
    py.detach(|| marginal::fit_marginal_with(&series.inner, &opts))
        .map(|inner| PyMarginalFit { inner })
        .map_err(to_py)
}

/// Standard and supremum score tests of `τ = 0` at the GLM fit.
#[pyfunction]
#[pyo3(signature = (series, grid = None))]
fn test_latent(py: Python<'_>, series: &PySeries, grid: Option<Vec<f64>>) -> PyResult<PyLatentTest> {
    let grid = grid.unwrap_or_else(default_grid);
    let s = &series.inner;
    let (standard, sup) = py
        .detach(|| {
            let fit = glm::fit_glm(s)?;
            Ok::<_, Error>((standard_latent_test(s, &fit)?, sup_latent_test(s, &fit, &grid)?))
        })
        .map_err(to_py)?;
    Ok(PyLatentTest {
        standard_statistic: standard.statistic,
        standard_p_value: standard.p_value,
        sup_statistic: sup.statistic,
        argmax_psi: sup.argmax_psi,
        p_value_davies: sup.p_value_davies,
        grid: sup.grid,
        per_psi: sup.per_psi,
        dropped: sup.dropped,
    })
}

/// Score test of serial dependence against `χ²(lags)`.
#[pyfunction]
#[pyo3(signature = (series, fit, lags = 2))]
fn test_serial(series: &PySeries, fit: &PyMarginalFit, lags: usize) -> PyResult<PySerialTest> {
    let r = serial_dependence_test(&series.inner, &fit.inner, lags).map_err(to_py)?;
    Ok(PySerialTest {
        statistic: r.statistic,
        p_value: r.p_value,
        lags: r.lags,
        scores: r.scores,
        omegas: r.omegas,
    })
}

/// One series on `x_t = (1, t/n)` with an AR(1) latent process.
///
/// `scaling` is `"marginal"` (`Var α_t = τ`) or `"unit"` (`α_t = √τ α̃_t`).
#[pyfunction]
#[pyo3(signature = (n, m, beta, tau = 0.0, phi = 0.0, scaling = "marginal", seed = 42))]
fn simulate(n: usize, m: u32, beta: Vec<f64>, tau: f64, phi: f64, scaling: &str, seed: u64) -> PyResult<PySeries> {
    let scaling = match scaling {
        "marginal" => LatentScaling::MarginalVariance,
        "unit" => LatentScaling::UnitInnovation,
        other => {
            return Err(PyValueError::new_err(format!(
                "scaling must be 'marginal' or 'unit', got {other:?}"
            )))
        }
    };
    let spec = DgpSpec::linear_trend(n, m, beta, LatentSpec { tau, phi, scaling }, seed);
    spec.validate().map_err(to_py)?;
    simulate_series(&spec, &RandomSource::new(seed, 0))
        .map(|inner| PySeries { inner })
        .map_err(to_py)
}

/// `f(y) = ∫ C(m, y) π^y (1 − π)^{m−y} φ(z) dz` with `π = ḃ(η + √τ z)`.
#[pyfunction]
fn marginal_density(y: u32, m: u32, eta: f64, tau: f64) -> PyResult<f64> {
    marginal::obs_marginal_density(y, m, eta, tau).map_err(to_py)
}

#[pymodule]
pub fn binlat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("BinlatError", m.py().get_type::<BinlatError>())?;
    m.add("DegenerateError", m.py().get_type::<DegenerateError>())?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyGlmFit>()?;
    m.add_class::<PyMarginalFit>()?;
    m.add_class::<PyLatentTest>()?;
    m.add_class::<PySerialTest>()?;
    m.add_function(wrap_pyfunction!(fit_glm, m)?)?;
    m.add_function(wrap_pyfunction!(fit_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(test_latent, m)?)?;
    m.add_function(wrap_pyfunction!(test_serial, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_density, m)?)?;
    Ok(())
}
