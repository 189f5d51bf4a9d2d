//! Python bindings: data sets, chain configuration, posterior draws and the
//! numerical building blocks.
//!
//! ```python
//! import pyhblasso as hb
//! data = hb.Dataset.from_csv("d.csv", "y").standardize()
//! post = hb.fit(data, hb.FitConfig("hbl", iterations=2500, burn_in=500))
//! print(post.summary()[1])
//! ```

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hblasso::diagnostics::{run_loocv, summarize};
use hblasso::eta_approx::{self, GammaApprox};
use hblasso::experiments::{gen_scenario, ScenarioSpec};
use hblasso::io::load_csv;
use hblasso::model::hyperbolic_loss as hyperbolic_loss_rs;
use hblasso::rng_dist::{self, GigParams, RngStream};
use hblasso::special_fn;
use hblasso::{
    run_chain, EtaMode, FitConfig, HblError, Hyperparams, LambdaMode, PosteriorSamples, SamplerKind,
};

fn to_py(e: HblError) -> PyErr {
    match e {
        HblError::Io(_) => PyIOError::new_err(e.to_string()),
        HblError::Sampler { .. } | HblError::NotPositiveDefinite { .. } | HblError::Csv(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Response vector and design matrix.
#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: hblasso::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `x` is a list of rows.
    #[new]
    #[pyo3(signature = (y, x, response = "y".to_string(), columns = None))]
    fn new(
        y: Vec<f64>,
        x: Vec<Vec<f64>>,
        response: String,
        columns: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let n = x.len();
        let p = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != p) {
            return Err(PyValueError::new_err("rows of x differ in length"));
        }
        let flat: Vec<f64> = x.into_iter().flatten().collect();
        let names = columns.unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        let inner = hblasso::Dataset::with_names(
            DVector::from_vec(y),
            DMatrix::from_row_slice(n, p, &flat),
            response,
            names,
        )
        .map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, response = "y"))]
    fn from_csv(path: PathBuf, response: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_csv(&path, response).map_err(to_py)?,
        })
    }

    /// Copy with `y` and every column centered and scaled to unit variance.
    fn standardize(&self) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.standardize().map_err(to_py)?,
        })
    }

    /// Intercept and slopes on the original scale from standardized-scale
    /// coefficients.
    fn back_transform(&self, intercept: f64, beta: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        if beta.len() != self.inner.p() {
            return Err(PyValueError::new_err("beta length differs from p"));
        }
        let (b0, b) = self
            .inner
            .back_transform(intercept, &DVector::from_vec(beta));
        Ok((b0, b.iter().copied().collect()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.iter().copied().collect()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        self.inner
            .x
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.inner.column_names.clone()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={})", self.inner.n(), self.inner.p())
    }
}

/// Sampler choice and chain settings. `eta` / `lam` of `None` are learned.
#[pyclass(name = "FitConfig", from_py_object)]
#[derive(Clone)]
struct PyFitConfig {
    inner: FitConfig,
}

#[pymethods]
impl PyFitConfig {
    #[new]
    #[pyo3(signature = (
        method = "hbl", iterations = 2500, burn_in = 500, seed = 1, eta = None, lam = None,
        thin = 1, a = 1.0, b = 1.0, c = 1.0, d = 1.0, store_full_state = false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        method: &str,
        iterations: usize,
        burn_in: usize,
        seed: u64,
        eta: Option<f64>,
        lam: Option<f64>,
        thin: usize,
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        store_full_state: bool,
    ) -> PyResult<Self> {
        let mut kind: SamplerKind = method.parse().map_err(to_py)?;
        if eta.is_some() && kind == SamplerKind::Hbl {
            kind = SamplerKind::HblFixedEta;
        }
        let mut inner = FitConfig::new(kind, iterations, burn_in, seed);
        inner.thin = thin;
        inner.store_full_state = store_full_state;
        inner.hyper = Hyperparams {
            a,
            b,
            c,
            d,
            eta_mode: eta.map_or(EtaMode::Learned, EtaMode::Fixed),
            lambda_mode: lam.map_or(LambdaMode::Learned, LambdaMode::Fixed),
            ..Hyperparams::default()
        };
        inner.validate().map_err(to_py)?;
        inner.hyper.validate().map_err(to_py)?;
        Ok(PyFitConfig { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.sampler_kind.label()
    }

    #[getter]
    fn stored_draws(&self) -> usize {
        self.inner.stored_draws()
    }

    fn __repr__(&self) -> String {
        format!(
            "FitConfig(method={}, iterations={}, burn_in={}, seed={})",
            self.inner.sampler_kind.label(),
            self.inner.iterations,
            self.inner.burn_in,
            self.inner.seed
        )
    }
}

/// Stored draws, one column per parameter.
#[pyclass(name = "Posterior")]
struct PyPosterior {
    inner: PosteriorSamples,
}

#[pymethods]
impl PyPosterior {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    /// Draws as a list of rows.
    #[getter]
    fn draws(&self) -> Vec<Vec<f64>> {
        self.inner
            .draws
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner
            .column(name)
            .map(|c| c.iter().copied().collect())
            .ok_or_else(|| PyValueError::new_err(format!("no parameter named '{name}'")))
    }

    /// Per-parameter mean, median, 95% interval and effective sample size.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let s = summarize(&self.inner).map_err(to_py)?;
        s.params
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("name", &p.name)?;
                d.set_item("mean", p.mean)?;
                d.set_item("median", p.median)?;
                d.set_item("lower", p.lower)?;
                d.set_item("upper", p.upper)?;
                d.set_item("ess", p.ess)?;
                Ok(d)
            })
            .collect()
    }

    /// Share of `eta` updates whose fixed point met the tolerance.
    #[getter]
    fn fixed_point_rate(&self) -> Option<f64> {
        let fp = self.inner.fixed_point;
        (fp.calls > 0).then(|| fp.converged as f64 / fp.calls as f64)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Runs one chain. The interpreter lock is released meanwhile.
#[pyfunction]
fn fit(py: Python<'_>, data: PyDataset, config: PyFitConfig) -> PyResult<PyPosterior> {
    let inner = py
        .detach(|| run_chain(&data.inner, &config.inner))
        .map_err(to_py)?;
    Ok(PyPosterior { inner })
}

/// Leave-one-out MSPE, MAPE, MHPE and MedSPE.
#[pyfunction]
fn loocv<'py>(
    py: Python<'py>,
    data: PyDataset,
    config: PyFitConfig,
) -> PyResult<Bound<'py, PyDict>> {
    let m = py
        .detach(|| run_loocv(&data.inner, &config.inner))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mspe", m.mspe)?;
    d.set_item("mape", m.mape)?;
    d.set_item("mhpe", m.mhpe)?;
    d.set_item("medspe", m.medspe)?;
    Ok(d)
}

/// Replication `rep` of simulation scenario `model` (1-4); returns the data
/// and the true intercept plus slopes.
#[pyfunction]
#[pyo3(signature = (model, n, rep = 0, seed = 1))]
fn simulate_scenario(
    model: u8,
    n: usize,
    rep: usize,
    seed: u64,
) -> PyResult<(PyDataset, Vec<f64>)> {
    let spec = ScenarioSpec::paper(model, n, rep + 1, seed).map_err(to_py)?;
    let (data, truth) = gen_scenario(&spec, rep).map_err(to_py)?;
    Ok((PyDataset { inner: data }, truth.iter().copied().collect()))
}

/// `log(K_nu(x) e^x)`.
#[pyfunction]
fn log_bessel_k_scaled(nu: f64, x: f64) -> PyResult<f64> {
    special_fn::log_bessel_k_scaled(nu, x).map_err(to_py)
}

/// First and second derivatives of `log K_nu` at `x`.
#[pyfunction]
fn log_k_derivatives(nu: f64, x: f64) -> PyResult<(f64, f64)> {
    special_fn::log_k_derivatives(nu, x).map_err(to_py)
}

fn approx_dict<'py>(py: Python<'py>, g: &GammaApprox) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("shape", g.shape)?;
    d.set_item("rate", g.rate)?;
    d.set_item("iterations", g.iterations_used)?;
    d.set_item("converged", g.converged)?;
    Ok(d)
}

/// Gamma approximation to the `eta` conditional for `n` observations with
/// statistic `p_stat` and `Ga(c, d)` prior.
#[pyfunction]
#[pyo3(signature = (n, p_stat, c = 1.0, d = 1.0, max_iter = 10, tol = 1e-8))]
fn solve_ab<'py>(
    py: Python<'py>,
    n: usize,
    p_stat: f64,
    c: f64,
    d: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    approx_dict(py, &eta_approx::solve_ab(n, p_stat, c, d, max_iter, tol))
}

/// Total variation and both KL divergences between the exact `eta`
/// conditional and its gamma approximation.
#[pyfunction]
#[pyo3(signature = (n, p_stat, c = 1.0, d = 1.0, mc_size = 10000, seed = 1))]
fn discrepancy<'py>(
    py: Python<'py>,
    n: usize,
    p_stat: f64,
    c: f64,
    d: f64,
    mc_size: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut rng = RngStream::new(seed, 0);
    let e = eta_approx::discrepancy(n, p_stat, c, d, mc_size, &mut rng).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("tv", e.tv)?;
    out.set_item("kl", e.kl)?;
    out.set_item("reverse_kl", e.reverse_kl)?;
    out.set_item("approx", approx_dict(py, &e.approx)?)?;
    Ok(out)
}

/// `size` draws from `GIG(nu, a, b)` with density proportional to
/// `x^(nu-1) exp(-(a x + b / x) / 2)`.
#[pyfunction]
#[pyo3(signature = (nu, a, b, size = 1, seed = 1))]
fn sample_gig(nu: f64, a: f64, b: f64, size: usize, seed: u64) -> PyResult<Vec<f64>> {
    let mut rng = RngStream::new(seed, 0);
    (0..size)
        .map(|_| rng_dist::sample_gig(GigParams::from_ab(nu, a, b), &mut rng).map_err(to_py))
        .collect()
}

/// `sqrt(eta (eta + x^2 / rho2)) - eta`.
#[pyfunction]
#[pyo3(signature = (x, eta, rho2 = 1.0))]
fn hyperbolic_loss(x: f64, eta: f64, rho2: f64) -> f64 {
    hyperbolic_loss_rs(x, eta, rho2)
}

#[pymodule]
fn pyhblasso(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFitConfig>()?;
    m.add_class::<PyPosterior>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(loocv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(log_bessel_k_scaled, m)?)?;
    m.add_function(wrap_pyfunction!(log_k_derivatives, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ab, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gig, m)?)?;
    m.add_function(wrap_pyfunction!(hyperbolic_loss, m)?)?;
    Ok(())
}
