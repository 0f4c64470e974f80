//! Python bindings for the gmeef toolkit.
//!
//! The module mirrors the Rust API at the granularity a notebook wants:
//! kernel mixes and information potentials, the error quantizer, the linear
//! adaptive filters, the kernel recursive regressor, the chaotic series
//! generator, and the JSON-configured study runner.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gmeef::criterion::{self, ErrorWindow, FiducialMix, GgdParams};
use gmeef::experiments::mackey_glass::{gen_mackey_glass, MgConfig};
use gmeef::filters::{Algorithm, FilterState, RegressionSample};
use gmeef::kernel::{KernelConfig, KernelModel};
use gmeef::quantizer;
use gmeef::runner::{self, ExperimentConfig};

fn val_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_algorithm(name: &str) -> PyResult<Algorithm> {
    match name.to_ascii_lowercase().as_str() {
        "lms" => Ok(Algorithm::Lms),
        "lmf" => Ok(Algorithm::Lmf),
        "gmcc" => Ok(Algorithm::Gmcc),
        "gmee" => Ok(Algorithm::Gmee),
        "gmeef" => Ok(Algorithm::Gmeef),
        "qgmeef" => Ok(Algorithm::Qgmeef),
        other => Err(val_err(format!(
            "unknown algorithm `{other}`; expected one of lms, lmf, gmcc, gmee, gmeef, qgmeef"
        ))),
    }
}

/// Blend of two generalized Gaussian kernels: weight `lam` on the fiducial
/// (correntropy) kernel `(alpha1, beta1)` and `1 - lam` on the entropy
/// kernel `(alpha2, beta2)`.
#[pyclass(name = "Mix")]
#[derive(Clone)]
struct PyMix {
    inner: FiducialMix,
}

#[pymethods]
impl PyMix {
    #[new]
    #[pyo3(signature = (lam=0.8, alpha1=2.0, beta1=10.0, alpha2=1.0, beta2=20.0))]
    fn new(lam: f64, alpha1: f64, beta1: f64, alpha2: f64, beta2: f64) -> PyResult<Self> {
        let corr = GgdParams::new(alpha1, beta1).map_err(val_err)?;
        let ent = GgdParams::new(alpha2, beta2).map_err(val_err)?;
        let inner = FiducialMix::new(lam, corr, ent).map_err(val_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.corr().alpha()
    }

    #[getter]
    fn beta1(&self) -> f64 {
        self.inner.corr().beta()
    }

    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.ent().alpha()
    }

    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.ent().beta()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mix(lam={}, alpha1={}, beta1={}, alpha2={}, beta2={})",
            self.lam(),
            self.alpha1(),
            self.beta1(),
            self.alpha2(),
            self.beta2()
        )
    }
}

impl PyMix {
    fn default_inner() -> FiducialMix {
        FiducialMix::new(
            0.8,
            GgdParams::new(2.0, 10.0).expect("static parameters"),
            GgdParams::new(1.0, 20.0).expect("static parameters"),
        )
        .expect("static parameters")
    }
}

/// Online quantizer over a scalar stream: values within `epsilon` of an
/// existing code merge into it (incrementing its count), anything farther
/// becomes a new code.
#[pyclass(name = "Codebook")]
struct PyCodebook {
    inner: quantizer::Codebook,
}

#[pymethods]
impl PyCodebook {
    #[new]
    fn new(epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: quantizer::Codebook::new(epsilon).map_err(val_err)?,
        })
    }

    /// Quantizes one value; returns `(code, index)`.
    fn quantize(&mut self, value: f64) -> (f64, usize) {
        self.inner.quantize(value)
    }

    fn codes(&self) -> Vec<f64> {
        self.inner.codes().to_vec()
    }

    fn counts(&self) -> Vec<u64> {
        self.inner.counts().to_vec()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Linear adaptive filter ascending the blended potential of its sliding
/// error window (or running the LMS/LMF baselines).
#[pyclass(name = "Filter")]
struct PyFilter {
    state: FilterState,
    kind: Algorithm,
    book: quantizer::Codebook,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (algorithm, taps, step, window=50, mix=None, epsilon=0.02))]
    fn new(
        algorithm: &str,
        taps: usize,
        step: f64,
        window: usize,
        mix: Option<PyMix>,
        epsilon: f64,
    ) -> PyResult<Self> {
        let kind = parse_algorithm(algorithm)?;
        let mix = mix.map(|m| m.inner).unwrap_or_else(PyMix::default_inner);
        let state = FilterState::new(taps, window, step, mix).map_err(val_err)?;
        let book = quantizer::Codebook::new(epsilon).map_err(val_err)?;
        Ok(Self { state, kind, book })
    }

    /// Filter output for `x` without touching the window or the weights.
    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.state.predict(&x).map_err(val_err)
    }

    /// Ingests `(x, desired)`, applies one adaptation step, and returns the
    /// pre-update innovation error.
    fn adapt(&mut self, x: Vec<f64>, desired: f64) -> PyResult<f64> {
        let sample = RegressionSample::new(x, desired);
        let e = self.state.error(&sample).map_err(val_err)?;
        match self.kind {
            Algorithm::Qgmeef => {
                self.state.quantize_latest(&mut self.book).map_err(val_err)?;
                self.state.qgmeef_step(&self.book).map_err(val_err)?;
            }
            kind => self.state.baseline_step(kind).map_err(val_err)?,
        }
        Ok(e)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.state.weights().to_vec()
    }

    fn set_weights(&mut self, w: Vec<f64>) -> PyResult<()> {
        self.state.set_weights(&w).map_err(val_err)
    }

    #[getter]
    fn iteration(&self) -> u64 {
        self.state.iteration()
    }

    /// Errors currently held in the sliding window, oldest first.
    fn window_errors(&self) -> Vec<f64> {
        self.state.window_errors()
    }

    /// Codes held by the quantizer (empty unless the filter is qgmeef).
    fn codebook_len(&self) -> usize {
        self.book.len()
    }
}

/// Growing kernel regressor with a recursively maintained inverse system
/// matrix; the per-sample regularizer weight shrinks outlier influence.
#[pyclass(name = "KernelRegressor")]
struct PyKernelRegressor {
    cfg: KernelConfig,
    model: Option<KernelModel>,
}

#[pymethods]
impl PyKernelRegressor {
    #[new]
    #[pyo3(signature = (width, regularizer, mix=None))]
    fn new(width: f64, regularizer: f64, mix: Option<PyMix>) -> PyResult<Self> {
        let cfg = KernelConfig {
            width,
            regularizer,
            mix: mix.map(|m| m.inner).unwrap_or_else(PyMix::default_inner),
        };
        cfg.validate().map_err(val_err)?;
        Ok(Self { cfg, model: None })
    }

    /// Feeds one `(x, desired)` pair and returns the innovation error. The
    /// first call seeds the model; rejected updates raise `ValueError` and
    /// leave the model unchanged.
    fn update(&mut self, x: Vec<f64>, desired: f64) -> PyResult<f64> {
        let sample = RegressionSample::new(x, desired);
        match &mut self.model {
            None => {
                self.model = Some(KernelModel::init(&sample, self.cfg.clone()).map_err(val_err)?);
                Ok(sample.desired)
            }
            Some(model) => model.update(&sample).map_err(val_err),
        }
    }

    /// Kernel expansion value at `x`; an empty model predicts zero.
    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        match &self.model {
            None => Ok(0.0),
            Some(model) => model.predict(&x).map_err(val_err),
        }
    }

    fn __len__(&self) -> usize {
        self.model.as_ref().map_or(0, KernelModel::len)
    }
}

fn window_of(errors: &[f64]) -> PyResult<ErrorWindow> {
    if errors.is_empty() {
        return Err(val_err("errors must be non-empty"));
    }
    Ok(ErrorWindow::from_samples(errors.len(), errors))
}

/// Correntropy-style potential: the mean kernel value of the errors.
#[pyfunction]
#[pyo3(signature = (errors, alpha=2.0, beta=10.0))]
fn gmcc_ip(errors: Vec<f64>, alpha: f64, beta: f64) -> PyResult<f64> {
    let p = GgdParams::new(alpha, beta).map_err(val_err)?;
    criterion::gmcc_ip(&window_of(&errors)?, &p).map_err(val_err)
}

/// Entropy potential: the mean kernel value over all error pairs.
#[pyfunction]
#[pyo3(signature = (errors, alpha=1.0, beta=20.0))]
fn gmee_ip(errors: Vec<f64>, alpha: f64, beta: f64) -> PyResult<f64> {
    let p = GgdParams::new(alpha, beta).map_err(val_err)?;
    criterion::gmee_ip(&window_of(&errors)?, &p).map_err(val_err)
}

/// Blended potential `lam * gmcc + (1 - lam) * gmee` under `mix`.
#[pyfunction]
#[pyo3(signature = (errors, mix=None))]
fn gmeef_ip(errors: Vec<f64>, mix: Option<PyMix>) -> PyResult<f64> {
    let mix = mix.map(|m| m.inner).unwrap_or_else(PyMix::default_inner);
    criterion::gmeef_ip(&window_of(&errors)?, &mix).map_err(val_err)
}

/// Quantized entropy potential: errors are pushed through a fresh codebook
/// with threshold `epsilon`, then scored against the code/count view.
/// Returns `(potential, codebook_size)`.
#[pyfunction]
#[pyo3(signature = (errors, epsilon, alpha=1.0, beta=20.0))]
fn qgmee_ip(errors: Vec<f64>, epsilon: f64, alpha: f64, beta: f64) -> PyResult<(f64, usize)> {
    let p = GgdParams::new(alpha, beta).map_err(val_err)?;
    let mut book = quantizer::Codebook::new(epsilon).map_err(val_err)?;
    for &e in &errors {
        book.quantize(e);
    }
    let value = criterion::qgmee_ip(&window_of(&errors)?, book.codes(), book.counts(), &p)
        .map_err(val_err)?;
    Ok((value, book.len()))
}

/// Integrates the delay-differential chaotic series and returns uniformly
/// spaced samples of it.
#[pyfunction]
#[pyo3(signature = (length, delay=17.0, step=0.1, sample_every=1.0, history=1.2))]
fn mackey_glass(
    length: usize,
    delay: f64,
    step: f64,
    sample_every: f64,
    history: f64,
) -> PyResult<Vec<f64>> {
    let cfg = MgConfig {
        delay,
        step,
        sample_every,
        history,
        length,
    };
    gen_mackey_glass(&cfg).map_err(val_err)
}

/// Runs a JSON study config in memory and returns
/// `{label: {"points": [(iteration, value), ...], "diverged": int | None}}`.
#[pyfunction]
fn run_study<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json_str(config_json).map_err(val_err)?;
    let curves = runner::execute(&cfg).map_err(val_err)?;
    let out = PyDict::new(py);
    for curve in curves {
        let entry = PyDict::new(py);
        entry.set_item("points", curve.points)?;
        entry.set_item("diverged", curve.diverged)?;
        out.set_item(curve.algorithm, entry)?;
    }
    Ok(out)
}

/// Runs a JSON study config and writes the CSV and the resolved config under
/// `out_dir`; returns `{"csv", "config", "diverged"}`.
#[pyfunction]
fn write_study<'py>(py: Python<'py>, config_json: &str, out_dir: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json_str(config_json).map_err(val_err)?;
    let report = runner::run_config(&cfg, Path::new(out_dir)).map_err(val_err)?;
    let out = PyDict::new(py);
    out.set_item("csv", report.csv.display().to_string())?;
    out.set_item("config", report.sidecar.display().to_string())?;
    out.set_item("diverged", report.diverged)?;
    Ok(out)
}

/// One-paragraph catalogue of the bundled study kinds.
#[pyfunction]
fn list_experiments() -> String {
    runner::list_experiments()
}

#[pymodule]
fn gmeef_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMix>()?;
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyFilter>()?;
    m.add_class::<PyKernelRegressor>()?;
    m.add_function(wrap_pyfunction!(gmcc_ip, m)?)?;
    m.add_function(wrap_pyfunction!(gmee_ip, m)?)?;
    m.add_function(wrap_pyfunction!(gmeef_ip, m)?)?;
    m.add_function(wrap_pyfunction!(qgmee_ip, m)?)?;
    m.add_function(wrap_pyfunction!(mackey_glass, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(write_study, m)?)?;
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    Ok(())
}
