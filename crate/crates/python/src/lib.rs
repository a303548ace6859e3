//! Python bindings. Every failure raises `FracviscoError(kind, message)`
//! where `kind` is the stable error name also used by the command line tool.

use std::collections::BTreeMap;

use fracvisco::config::parse_config;
use fracvisco::diagnostics::energy_ledger;
use fracvisco::scalar::{self, ScalarModel};
use fracvisco::stepper::run;
use fracvisco::weights::build_weights;
use fracvisco::{KernelParams, TimeGrid, WeightMode};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(fracvisco_py, FracviscoError, PyException);

fn py_err(e: fracvisco::Error) -> PyErr {
    FracviscoError::new_err((e.kind(), e.to_string()))
}

fn kernel(alpha: f64, tau: f64, gamma: f64) -> PyResult<KernelParams> {
    KernelParams::new(alpha, tau, gamma).map_err(py_err)
}

fn mode(name: &str) -> PyResult<WeightMode> {
    name.parse().map_err(py_err)
}

/// `E_{alpha,b}(-x)` for `x >= 0`.
#[pyfunction]
fn ml_e(alpha: f64, b: f64, x: f64) -> PyResult<f64> {
    fracvisco::mlf::ml_e(alpha, b, x).map_err(py_err)
}

/// Memory kernel `beta(t)` for `t > 0`.
#[pyfunction]
#[pyo3(signature = (t, alpha = 2.0 / 3.0, tau = 1.0, gamma = 0.5))]
fn kernel_beta(t: f64, alpha: f64, tau: f64, gamma: f64) -> PyResult<f64> {
    fracvisco::mlf::kernel_beta(&kernel(alpha, tau, gamma)?, t).map_err(py_err)
}

/// `eta(t) = 1 - int_0^t beta`.
#[pyfunction]
#[pyo3(signature = (t, alpha = 2.0 / 3.0, tau = 1.0, gamma = 0.5))]
fn kernel_eta(t: f64, alpha: f64, tau: f64, gamma: f64) -> PyResult<f64> {
    fracvisco::mlf::eta_fn(&kernel(alpha, tau, gamma)?, t).map_err(py_err)
}

/// Weight table on the grid `nodes`: `(rows, etas)` with `rows[n-1][j-1] = omega_nj`
/// and `etas[n] = eta_n`, starting from `eta_0 = 1`.
#[pyfunction]
#[pyo3(signature = (nodes, alpha = 2.0 / 3.0, tau = 1.0, gamma = 0.5, mode = "closed_form"))]
fn weights(
    py: Python<'_>,
    nodes: Vec<f64>,
    alpha: f64,
    tau: f64,
    gamma: f64,
    mode: &str,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let (p, m) = (kernel(alpha, tau, gamma)?, self::mode(mode)?);
    py.allow_threads(|| {
        let grid = TimeGrid::from_nodes(nodes)?;
        let w = build_weights(&grid, &p, m)?;
        let rows = (1..=w.len()).map(|n| w.row(n).to_vec()).collect();
        Ok((rows, w.etas().to_vec()))
    })
    .map_err(py_err)
}

/// Single-mode dG(0) solution on a uniform grid: `(t, u, v)`.
#[pyfunction]
#[pyo3(signature = (end, steps, rho = 1.0, kappa = 1.0, alpha = 2.0 / 3.0, tau = 1.0, gamma = 0.5, u0 = 1.0, v0 = 0.0, mode = "closed_form"))]
#[allow(clippy::too_many_arguments)]
fn scalar_dg0(
    py: Python<'_>,
    end: f64,
    steps: usize,
    rho: f64,
    kappa: f64,
    alpha: f64,
    tau: f64,
    gamma: f64,
    u0: f64,
    v0: f64,
    mode: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let m = ScalarModel::new(rho, kappa, kernel(alpha, tau, gamma)?, u0, v0).map_err(py_err)?;
    let wm = self::mode(mode)?;
    py.allow_threads(|| {
        let grid = TimeGrid::uniform(end, steps)?;
        let tr = scalar::scalar_dg0_with(&m, &grid, wm)?;
        Ok((tr.t, tr.u, tr.v))
    })
    .map_err(py_err)
}

/// Errors of the single-mode model against its reference: a list of
/// `(k, error, order)` with `order` `None` on the first row.
#[pyfunction]
#[pyo3(signature = (steps, end = 4.0, rho = 1.0, kappa = 1.0, alpha = 2.0 / 3.0, tau = 1.0, gamma = 0.5, u0 = 1.0, v0 = 0.0, mode = "closed_form"))]
#[allow(clippy::too_many_arguments)]
fn convergence_study(
    py: Python<'_>,
    steps: Vec<f64>,
    end: f64,
    rho: f64,
    kappa: f64,
    alpha: f64,
    tau: f64,
    gamma: f64,
    u0: f64,
    v0: f64,
    mode: &str,
) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
    let m = ScalarModel::new(rho, kappa, kernel(alpha, tau, gamma)?, u0, v0).map_err(py_err)?;
    let wm = self::mode(mode)?;
    py.allow_threads(|| scalar::convergence_study(&m, end, &steps, wm))
        .map(|s| {
            s.table
                .rows
                .iter()
                .map(|r| (r.k, r.error, r.order))
                .collect()
        })
        .map_err(py_err)
}

/// Result of [`simulate`].
#[pyclass(get_all, frozen)]
struct Simulation {
    /// Time nodes.
    t: Vec<f64>,
    /// One `(x, y)` per probe.
    points: Vec<(f64, f64)>,
    /// Displacement per probe, one `(x, y)` pair per time node.
    displacement: Vec<Vec<(f64, f64)>>,
    /// Velocity per probe, one `(x, y)` pair per time node.
    velocity: Vec<Vec<(f64, f64)>>,
    /// Terms of the discrete energy identity.
    energy: BTreeMap<String, f64>,
}

#[pymethods]
impl Simulation {
    fn __repr__(&self) -> String {
        format!(
            "Simulation(steps={}, probes={})",
            self.t.len().saturating_sub(1),
            self.points.len()
        )
    }
}

/// Runs the configuration given as text, in the same format as the
/// command line tool's configuration files. Nothing is written to disk.
#[pyfunction]
fn simulate(py: Python<'_>, config: &str) -> PyResult<Simulation> {
    let text = config.to_string();
    py.allow_threads(move || -> fracvisco::Result<Simulation> {
        let cfg = parse_config(&text)?.config;
        let mesh = cfg.build_mesh()?;
        let sys = cfg.system(&mesh)?;
        let grid = cfg.grid()?;
        let w = cfg.weights(&grid)?;
        let (u0, v0) = cfg.initial_state(&mesh)?;
        let h = run(&sys, &grid, &w, &u0, &v0, cfg.stepper_options(&mesh))?;
        let ledger = energy_ledger(&h, &sys, &w)?;
        let pairs = |s: &[[f64; 2]]| s.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
        let mut energy: BTreeMap<String, f64> = ledger
            .terms()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        energy.insert("residual_rel".into(), ledger.residual_rel());
        Ok(Simulation {
            t: grid.nodes().to_vec(),
            points: h.probes.iter().map(|p| (p.point[0], p.point[1])).collect(),
            displacement: h.probes.iter().map(|p| pairs(&p.u1)).collect(),
            velocity: h.probes.iter().map(|p| pairs(&p.u2)).collect(),
            energy,
        })
    })
    .map_err(py_err)
}

#[pymodule]
fn fracvisco_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FracviscoError", m.py().get_type::<FracviscoError>())?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(ml_e, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_beta, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_eta, m)?)?;
    m.add_function(wrap_pyfunction!(weights, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_dg0, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
