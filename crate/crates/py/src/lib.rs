//! Python module `solstab`. Reports cross the boundary as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use solstab::construction::{build_sharp_example, ConstructionOptions};
use solstab::decomposition::{fit_modulation, FitMode, FitOptions};
use solstab::fields::{SolitonConfig, TorusField, TorusGrid};
use solstab::groundstate as gsm;
use solstab::interactions::{self, InteractionKind};
use solstab::spectral::{self, SpectralOptions};
use solstab::verifier::{self, Status};
use solstab::{special, Error, ProblemParams};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_)
        | Error::OutOfRange { .. }
        | Error::DegenerateInput(_)
        | Error::PhaseRestrictionViolated { .. }
        | Error::Format(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Radial ground state `Q` of `ΔQ − Q + Q^p = 0`.
#[pyclass(name = "GroundState", module = "solstab", frozen)]
struct PyGroundState {
    inner: gsm::GroundState,
}

#[pymethods]
impl PyGroundState {
    #[new]
    #[pyo3(signature = (d, p, tol = 1e-10))]
    fn new(py: Python<'_>, d: usize, p: f64, tol: f64) -> PyResult<Self> {
        let params = ProblemParams::new(d, p).map_err(err)?;
        let inner = py.detach(|| gsm::solve_ground_state(params, tol)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: gsm::GroundState::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }

    #[getter]
    fn r_max(&self) -> f64 {
        self.inner.r_max
    }

    #[getter]
    fn c_q(&self) -> f64 {
        self.inner.c_q
    }

    #[getter]
    fn q0(&self) -> f64 {
        self.inner.q0
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.r.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.clone()
    }

    #[getter]
    fn dq(&self) -> Vec<f64> {
        self.inner.dq.clone()
    }

    /// `(Q(r), Q'(r))`, using the fitted tail past the grid.
    fn eval(&self, r: f64) -> (f64, f64) {
        self.inner.eval(r)
    }

    fn value(&self, r: f64) -> f64 {
        self.inner.value(r)
    }

    fn log_value(&self, r: f64) -> f64 {
        self.inner.log_value(r)
    }

    fn max_ode_residual(&self) -> f64 {
        self.inner.ode_residuals().into_iter().fold(0.0, f64::max)
    }

    fn __repr__(&self) -> String {
        format!("GroundState(d={}, p={}, q0={}, c_q={})", self.inner.d(), self.inner.p(), self.inner.q0, self.inner.c_q)
    }
}

#[pyfunction]
fn phi(d: usize, t: f64) -> f64 {
    special::phi(d, t)
}

#[pyfunction]
fn psi(d: usize, s: f64) -> PyResult<f64> {
    special::psi(d, s).map_err(err)
}

/// `F_{d,p}(s)`.
#[pyfunction]
fn stability_modulus(d: usize, p: f64, s: f64) -> PyResult<f64> {
    special::stability_modulus(ProblemParams::new(d, p).map_err(err)?, s).map_err(err)
}

fn kind_from(name: &str, alpha: Option<f64>, beta: Option<f64>, p: f64) -> PyResult<InteractionKind> {
    Ok(match name {
        "overlap" => InteractionKind::Overlap { alpha: alpha.unwrap_or(p), beta: beta.unwrap_or(1.0) },
        "square-square" => InteractionKind::SquareSquare,
        "subquadratic" => InteractionKind::Subquadratic,
        "gradient" => InteractionKind::Gradient,
        other => return Err(PyValueError::new_err(format!("unknown interaction kind {other:?}"))),
    })
}

/// `ln` of the chosen interaction integral at separation `sep`, with its sign.
#[pyfunction]
#[pyo3(signature = (gs, kind, sep, alpha = None, beta = None))]
fn interaction(gs: &PyGroundState, kind: &str, sep: f64, alpha: Option<f64>, beta: Option<f64>) -> PyResult<(f64, f64)> {
    let g = &gs.inner;
    match kind_from(kind, alpha, beta, g.p())? {
        InteractionKind::Gradient => interactions::gradient_overlap(g, sep).map(|v| (v.sign, v.ln_abs)).map_err(err),
        k => k.eval(g, sep).map(|v| (1.0, v)).map_err(err),
    }
}

#[pyfunction]
fn c_bar(gs: &PyGroundState) -> PyResult<f64> {
    interactions::c_bar(&gs.inner).map_err(err)
}

/// Evaluates over `rs` and fits the asymptotic law; returns the fit summary.
#[pyfunction]
#[pyo3(signature = (gs, kind, rs, alpha = None, beta = None))]
fn interaction_scan<'py>(
    py: Python<'py>,
    gs: &PyGroundState,
    kind: &str,
    rs: Vec<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let k = kind_from(kind, alpha, beta, gs.inner.p())?;
    let scan = py.detach(|| interactions::scan(&gs.inner, k, &rs)).map_err(err)?;
    let summary: serde_json::Value = serde_json::from_str(&scan.summary_json().map_err(err)?).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &summary)
}

#[pyfunction]
#[pyo3(signature = (gs, ell, n_eigs = 4, h = 0.005, r_max = 40.0))]
fn spectrum<'py>(py: Python<'py>, gs: &PyGroundState, ell: usize, n_eigs: usize, h: f64, r_max: f64) -> PyResult<Bound<'py, PyAny>> {
    let opts = SpectralOptions { h, r_max, ..SpectralOptions::default() };
    let rep = py.detach(|| spectral::sector_spectrum(&gs.inner, ell, n_eigs, &opts)).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
fn kappa<'py>(py: Python<'py>, gs: &PyGroundState) -> PyResult<Bound<'py, PyAny>> {
    let rep = py.detach(|| spectral::estimate_kappa(&gs.inner, &SpectralOptions::default())).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[pyo3(signature = (points, delta = 0.1))]
fn project_points<'py>(py: Python<'py>, points: Vec<Vec<f64>>, delta: f64) -> PyResult<Bound<'py, PyAny>> {
    let res = solstab::geometry::project_points(&points, delta).map_err(err)?;
    to_py(py, &res)
}

/// Sharp example for `m` solitons `sep` apart: the report plus `u` on the grid.
#[pyfunction]
#[pyo3(signature = (gs, sep, m = 2, n = None))]
fn sharp_example<'py>(py: Python<'py>, gs: &PyGroundState, sep: f64, m: usize, n: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let g = &gs.inner;
    let (ex, grid) = py
        .detach(|| {
            let cfg = verifier::chain(g.params, m, sep)?;
            let reach = cfg.centers.iter().map(|y| y[0].abs()).fold(0.0, f64::max);
            let grid = verifier::default_grid(g.d(), reach, n)?;
            build_sharp_example(g, &cfg, grid, &ConstructionOptions::default()).map(|ex| (ex, grid))
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "report": ex.report,
        "grid": { "d": grid.d, "n": grid.n, "l": grid.l },
        "u": ex.u.real_values(),
    });
    to_py(py, &out)
}

/// Sharp-example sweep with its verdict: `{"status", "summary", "records", "csv"}`.
#[pyfunction]
#[pyo3(signature = (gs, rs, m = 2, n = None, bracket = 5.0))]
fn verify_sharp<'py>(py: Python<'py>, gs: &PyGroundState, rs: Vec<f64>, m: usize, n: Option<usize>, bracket: f64) -> PyResult<Bound<'py, PyAny>> {
    let g = &gs.inner;
    let (records, summary) = py
        .detach(|| {
            let records = verifier::sharp_sweep(g, m, &rs, n, &ConstructionOptions::default())?;
            let summary = verifier::summarize(&records, bracket)?;
            Ok::<_, Error>((records, summary))
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "status": summary.status == Status::Pass,
        "summary": summary,
        "records": records,
        "csv": verifier::records_to_csv(&records),
    });
    to_py(py, &out)
}

/// Fits the modulation of a real field sampled on the `n^d` torus of side `l`.
#[pyfunction]
#[pyo3(signature = (gs, values, n, l, centers, mode = "translations"))]
fn decompose<'py>(
    py: Python<'py>,
    gs: &PyGroundState,
    values: Vec<f64>,
    n: usize,
    l: f64,
    centers: Vec<Vec<f64>>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let g = &gs.inner;
    let mode = match mode {
        "translations" => FitMode::Translations,
        "phases" => FitMode::Phases,
        "amplitudes" => FitMode::Amplitudes,
        other => return Err(PyValueError::new_err(format!("unknown fit mode {other:?}"))),
    };
    let res = py
        .detach(|| {
            let grid = TorusGrid::new(g.d(), n, l)?;
            let u = TorusField::from_real(grid, values)?;
            let init = SolitonConfig::real(g.params, centers)?;
            fit_modulation(g, &u, &init, &FitOptions::with_mode(mode))
        })
        .map_err(err)?;
    let out: serde_json::Value = serde_json::from_str(&res.to_json().map_err(err)?).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &out)
}

#[pymodule]
#[pyo3(name = "solstab")]
fn solstab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroundState>()?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(stability_modulus, m)?)?;
    m.add_function(wrap_pyfunction!(interaction, m)?)?;
    m.add_function(wrap_pyfunction!(c_bar, m)?)?;
    m.add_function(wrap_pyfunction!(interaction_scan, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(project_points, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_example, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sharp, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
