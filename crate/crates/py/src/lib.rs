//! Python bindings: simulation, energy accounting, Monte Carlo estimates and
//! design optimization. Long computations release the GIL.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vines_core::dynamics::{self, InitialState, SimOptions, Tolerances};
use vines_core::metrics::{self, EfficiencyMode, Window};
use vines_core::optimizer::{self, Bounds, DesignSpace, GaConfig, McObjective};
use vines_core::scenarios::validation;
use vines_core::stochastic::{self, Aleatory, DesignPoint as CoreDesign, UncertaintyModel};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn tolerances(name: &str) -> PyResult<Tolerances> {
    match name {
        "default" => Ok(Tolerances::default()),
        "tight" => Ok(Tolerances::tight()),
        "fast" => Ok(Tolerances::fast()),
        other => Err(value_err(format!("unknown tolerance preset '{other}' (default, tight, fast)"))),
    }
}

fn efficiency_mode(name: &str) -> PyResult<EfficiencyMode> {
    match name {
        "dissipation_fraction" => Ok(EfficiencyMode::DissipationFraction),
        "time_averaged_er" => Ok(EfficiencyMode::TimeAveragedEr),
        other => Err(value_err(format!(
            "unknown efficiency mode '{other}' (dissipation_fraction, time_averaged_er)"
        ))),
    }
}

/// Nondimensional system parameters. `c_e` is the coil coefficient in the
/// relative coordinate; `from_design` converts a design-level value.
#[pyclass(name = "SystemParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySystemParams {
    inner: dynamics::SystemParams,
}

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (eps, lambda_, c_e, kappa, l_c))]
    fn new(eps: f64, lambda_: f64, c_e: f64, kappa: f64, l_c: f64) -> PyResult<Self> {
        let inner = dynamics::SystemParams::new(eps, lambda_, c_e, kappa, l_c).map_err(value_err)?;
        Ok(PySystemParams { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (eps, lambda_, c_e, kappa, l_c))]
    fn from_design(eps: f64, lambda_: f64, c_e: f64, kappa: f64, l_c: f64) -> PyResult<Self> {
        let inner = dynamics::SystemParams::from_design(eps, lambda_, c_e, kappa, l_c).map_err(value_err)?;
        Ok(PySystemParams { inner })
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn c_e(&self) -> f64 {
        self.inner.c_e
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }
    #[getter]
    fn l_c(&self) -> f64 {
        self.inner.l_c
    }

    fn __repr__(&self) -> String {
        let p = self.inner;
        format!("SystemParams(eps={}, lambda_={}, c_e={}, kappa={}, l_c={})", p.eps, p.lambda, p.c_e, p.kappa, p.l_c)
    }
}

/// Mean design of the absorber: restitution, half-gap and coil coefficient.
#[pyclass(name = "DesignPoint", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyDesignPoint {
    inner: CoreDesign,
}

#[pymethods]
impl PyDesignPoint {
    #[new]
    fn new(mu_kappa: f64, mu_lc: f64, mu_ce: f64) -> PyResult<Self> {
        let inner = CoreDesign::new(mu_kappa, mu_lc, mu_ce);
        inner.validate().map_err(value_err)?;
        Ok(PyDesignPoint { inner })
    }

    #[getter]
    fn mu_kappa(&self) -> f64 {
        self.inner.mu_kappa
    }
    #[getter]
    fn mu_lc(&self) -> f64 {
        self.inner.mu_lc
    }
    #[getter]
    fn mu_ce(&self) -> f64 {
        self.inner.mu_ce
    }

    fn __repr__(&self) -> String {
        let d = self.inner;
        format!("DesignPoint(mu_kappa={}, mu_lc={}, mu_ce={})", d.mu_kappa, d.mu_lc, d.mu_ce)
    }
}

/// Result of one simulation.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: dynamics::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    /// Samples as a dict of equal-length lists. Impact pairs are included
    /// unless `grid_only`, which keeps the uniform output grid.
    #[pyo3(signature = (grid_only = false))]
    fn samples<'py>(&self, py: Python<'py>, grid_only: bool) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let states: Vec<&dynamics::SimState> = if grid_only {
            self.inner.grid_states().collect()
        } else {
            self.inner.samples.iter().map(|s| &s.state).collect()
        };
        let col = |f: fn(&dynamics::SimState) -> f64| -> Vec<f64> { states.iter().map(|s| f(s)).collect() };
        d.set_item("tau", col(|s| s.tau))?;
        d.set_item("x1", col(|s| s.x1))?;
        d.set_item("v1", col(|s| s.v1))?;
        d.set_item("x2", col(|s| s.x2))?;
        d.set_item("v2", col(|s| s.v2))?;
        Ok(d)
    }

    /// Impacts as `(tau, wall, v1_pre, v2_pre, v1_post, v2_post, energy_loss)` tuples.
    fn impacts(&self) -> Vec<(f64, i8, f64, f64, f64, f64, f64)> {
        self.inner
            .impacts
            .iter()
            .map(|e| (e.tau, e.wall.sign() as i8, e.v1_pre, e.v2_pre, e.v1_post, e.v2_post, e.energy_loss))
            .collect()
    }

    /// Normalized energy channels per sample.
    fn ledger<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let l = metrics::build_ledger(&self.inner).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("e0", l.e0)?;
        d.set_item("tau", l.tau)?;
        d.set_item("e_mech", l.e_mech)?;
        d.set_item("e_damp", l.e_damp)?;
        d.set_item("e_coil", l.e_coil)?;
        d.set_item("e_imp", l.e_imp)?;
        d.set_item("e_r", l.e_r)?;
        Ok(d)
    }

    /// Efficiency in percent at `horizon` (default: end of the run).
    #[pyo3(signature = (mode = "dissipation_fraction", horizon = None))]
    fn efficiency(&self, mode: &str, horizon: Option<f64>) -> PyResult<f64> {
        let h = horizon.unwrap_or(self.inner.t_end);
        metrics::efficiency(&self.inner, efficiency_mode(mode)?, h).map(|r| r.value).map_err(value_err)
    }

    /// Impact count per LO cycle.
    fn impacts_per_cycle(&self) -> Vec<usize> {
        metrics::impacts_per_cycle(&self.inner).iter().map(|c| c.impacts).collect()
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn projected_initial(&self) -> bool {
        self.inner.projected_initial
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

/// Integrates the system from `(x1, v1, x2, v2)` up to `horizon`.
#[pyfunction]
#[pyo3(signature = (params, v1, horizon, x1 = 0.0, x2 = 0.0, v2 = 0.0, sample_dt = 0.01, tol = "default"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    params: PySystemParams,
    v1: f64,
    horizon: f64,
    x1: f64,
    x2: f64,
    v2: f64,
    sample_dt: Option<f64>,
    tol: &str,
) -> PyResult<PyTrajectory> {
    let opts = SimOptions { tol: tolerances(tol)?, sample_dt };
    let init = InitialState { x1, v1, x2, v2 };
    let inner = py
        .detach(|| dynamics::simulate_with(&params.inner, &init, horizon, &opts))
        .map_err(value_err)?;
    Ok(PyTrajectory { inner })
}

/// Post-impact velocities and energy loss: `(v1_post, v2_post, loss)`.
#[pyfunction]
fn impact_map(v1: f64, v2: f64, params: PySystemParams) -> (f64, f64, f64) {
    let o = dynamics::impact_map(v1, v2, &params.inner);
    (o.v1_post, o.v2_post, o.energy_loss)
}

/// One-sided amplitude spectrum of a uniformly sampled signal: `(freqs, amps)`.
#[pyfunction]
#[pyo3(signature = (tau, signal, hann = true))]
fn amplitude_spectrum(tau: Vec<f64>, signal: Vec<f64>, hann: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let w = if hann { Window::Hann } else { Window::None };
    let s = metrics::amplitude_spectrum(&tau, &signal, w).map_err(value_err)?;
    Ok(s.into_iter().unzip())
}

/// Morlet wavelet magnitude `|W|[scale][time]` on the given frequencies (cycles per unit time).
#[pyfunction]
fn cwt_morlet(py: Python<'_>, tau: Vec<f64>, signal: Vec<f64>, freqs: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let scales: Vec<f64> = freqs.iter().map(|&f| metrics::scale_of_frequency(f)).collect();
    py.detach(|| metrics::cwt_morlet(&tau, &signal, &scales)).map_err(value_err)
}

fn uncertainty(
    v1_range: (f64, f64),
    design_sd: Option<[f64; 3]>,
    eps: f64,
    lambda: f64,
) -> PyResult<UncertaintyModel> {
    let base = UncertaintyModel::default();
    let aleatory = if v1_range.0 == v1_range.1 {
        Aleatory::Point { value: v1_range.0 }
    } else {
        Aleatory::Uniform { lo: v1_range.0, hi: v1_range.1 }
    };
    let u = UncertaintyModel { design_sd: design_sd.unwrap_or(base.design_sd), aleatory, eps, lambda, ..base };
    u.validate().map_err(value_err)?;
    Ok(u)
}

/// Monte Carlo efficiency statistics of a design.
#[pyfunction]
#[pyo3(signature = (design, n = 1000, seed = 0, horizon = 30.0, v1_range = (0.1, 1.0), design_sd = None, eps = 0.05, lambda_ = 0.2))]
#[allow(clippy::too_many_arguments)]
fn mc_estimate<'py>(
    py: Python<'py>,
    design: PyDesignPoint,
    n: usize,
    seed: u64,
    horizon: f64,
    v1_range: (f64, f64),
    design_sd: Option<[f64; 3]>,
    eps: f64,
    lambda_: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let u = uncertainty(v1_range, design_sd, eps, lambda_)?;
    let e = py.detach(|| stochastic::mc_estimate(&design.inner, &u, n, seed, horizon)).map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("mean", e.mean)?;
    d.set_item("sigma", e.sigma)?;
    d.set_item("ci95", e.ci95)?;
    d.set_item("n", e.n)?;
    d.set_item("failures", e.failures)?;
    d.set_item("seed", e.seed)?;
    Ok(d)
}

/// Stochastic design search. `method` is "ga" (maximize mean) or "nsga2"
/// (maximize mean, minimize sigma). Returns the best design, its score,
/// the front (NSGA-II only) and per-generation history.
#[pyfunction]
#[pyo3(signature = (method = "ga", population = 32, generations = 40, mc_samples = 200, seed = 0, horizon = 30.0, v1_range = (0.1, 1.0), eps = 0.05, lambda_ = 0.2))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    method: &str,
    population: usize,
    generations: usize,
    mc_samples: usize,
    seed: u64,
    horizon: f64,
    v1_range: (f64, f64),
    eps: f64,
    lambda_: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let u = uncertainty(v1_range, None, eps, lambda_)?;
    let cfg = GaConfig { population, generations, mc_samples, root_seed: seed, horizon, ..GaConfig::default() };
    let space = DesignSpace::all_free(Bounds::default());
    let obj = McObjective::new(u, mc_samples, horizon);
    let r = match method {
        "ga" => py.detach(|| optimizer::ga_optimize(&obj, &space, &cfg)),
        "nsga2" => py.detach(|| optimizer::nsga2_optimize(&obj, &space, &cfg)),
        other => return Err(value_err(format!("unknown method '{other}' (ga, nsga2)"))),
    }
    .map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("best", PyDesignPoint { inner: r.best.design })?;
    d.set_item("mean", r.best.mean)?;
    d.set_item("sigma", r.best.sigma)?;
    let front: Vec<(PyDesignPoint, f64, f64)> =
        r.front.iter().map(|s| (PyDesignPoint { inner: s.design }, s.mean, s.sigma)).collect();
    d.set_item("front", front)?;
    let history: Vec<(usize, f64, f64, f64)> =
        r.history.iter().map(|h| (h.generation, h.best, h.mean, h.best_ever)).collect();
    d.set_item("history", history)?;
    d.set_item("evaluations", r.evaluations)?;
    d.set_item("simulations", r.simulations)?;
    Ok(d)
}

/// Runs the built-in validation checks; `full` adds the GA-based ones.
#[pyfunction]
#[pyo3(signature = (full = false, seed = 0))]
fn validate(py: Python<'_>, full: bool, seed: u64) -> Vec<(u8, String, bool, bool, String)> {
    py.detach(|| validation::run_checks(full, seed))
        .into_iter()
        .map(|c| (c.id, c.name.to_string(), c.passed, c.skipped, c.detail))
        .collect()
}

/// Converts a design-level coil coefficient to the simulation scale.
#[pyfunction]
fn coil_from_design(c_e: f64, eps: f64) -> f64 {
    dynamics::coil_from_design(c_e, eps)
}

#[pymodule]
fn vines(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyDesignPoint>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(impact_map, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(cwt_morlet, m)?)?;
    m.add_function(wrap_pyfunction!(mc_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(coil_from_design, m)?)?;
    Ok(())
}
