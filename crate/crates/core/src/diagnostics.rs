//! Discrete energy balance of a computed history and long-time limits.
//!
//! With `a(v, w) = vᵀKw`, `‖v‖² = vᵀMv`, `D_n = U1_n - U1_{n-1}` and
//! `W_nj = U1_n - U1_j`, every dG(0) history satisfies
//!
//! ```text
//! η_N a(U1_N) + ‖U2_N‖²
//!   + Σ_n { -(η_n - η_{n-1}) a(U1_{n-1}) + η_n a(D_n) }
//!   + Σ_{n≥2} Σ_{j<n} (ω_nj / k_n) { a(W_nj) - a(W_{n-1,j}) + a(D_n) }
//!   + Σ_{n<N} ‖U2_{n+1} - U2_n‖²
//! = a(u0) + ‖v0‖² + Σ_n 2 k_n (F̄_n + Ḡ_n)·U2_n
//! ```
//!
//! where `U2_0 = v0`. All left-hand groups are nonnegative when the kernel
//! averages decrease.

use std::fmt;

use log::warn;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::fem::{quasi_static_solve, AssembledSystem, SolverKind};
use crate::stepper::SolutionHistory;
use crate::weights::WeightTable;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    /// `η_N a(U1_N, U1_N)`
    pub final_elastic: f64,
    /// `‖U2_N‖²_M`
    pub final_kinetic: f64,
    pub eta_dissipation: f64,
    /// Per-pair grouping.
    pub history_dissipation: f64,
    /// The same quantity after summation by parts in `n`.
    pub history_dissipation_by_parts: f64,
    pub jump_dissipation: f64,
    /// `a(u0, u0) + ‖v0‖²_M`
    pub initial_energy: f64,
    pub load_work: f64,
}

impl EnergyLedger {
    pub fn lhs(&self) -> f64 {
        self.final_elastic
            + self.final_kinetic
            + self.eta_dissipation
            + self.history_dissipation
            + self.jump_dissipation
    }

    pub fn rhs(&self) -> f64 {
        self.initial_energy + self.load_work
    }

    /// `|LHS - RHS| / |RHS|`, zero when both sides vanish.
    pub fn residual_rel(&self) -> f64 {
        let (l, r) = (self.lhs(), self.rhs());
        if l == r {
            0.0
        } else {
            (l - r).abs() / r.abs()
        }
    }

    /// Relative disagreement of the two history groupings.
    pub fn grouping_defect(&self) -> f64 {
        let (a, b) = (self.history_dissipation, self.history_dissipation_by_parts);
        let scale = a.abs().max(b.abs());
        if scale == 0.0 {
            0.0
        } else {
            (a - b).abs() / scale
        }
    }

    pub fn dissipation_terms(&self) -> [(&'static str, f64); 3] {
        [
            ("eta_dissipation", self.eta_dissipation),
            ("history_dissipation", self.history_dissipation),
            ("jump_dissipation", self.jump_dissipation),
        ]
    }

    /// Smallest dissipation term divided by `|RHS|`.
    pub fn min_dissipation_ratio(&self) -> f64 {
        let r = self.rhs().abs();
        let m = self
            .dissipation_terms()
            .iter()
            .map(|t| t.1)
            .fold(f64::INFINITY, f64::min);
        if r == 0.0 {
            m.signum().min(0.0)
        } else {
            m / r
        }
    }

    /// Labeled rows in a fixed order.
    pub fn terms(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("final_elastic", self.final_elastic),
            ("final_kinetic", self.final_kinetic),
            ("eta_dissipation", self.eta_dissipation),
            ("history_dissipation", self.history_dissipation),
            (
                "history_dissipation_by_parts",
                self.history_dissipation_by_parts,
            ),
            ("jump_dissipation", self.jump_dissipation),
            ("lhs", self.lhs()),
            ("initial_energy", self.initial_energy),
            ("load_work", self.load_work),
            ("rhs", self.rhs()),
        ]
    }
}

impl fmt::Display for EnergyLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in self.terms() {
            writeln!(f, "{name:>30} {v:.15e}")?;
        }
        write!(f, "{:>30} {:.3e}", "residual_rel", self.residual_rel())
    }
}

/// Evaluate every term of the balance on `h`, which must come from `w`.
pub fn energy_ledger(
    h: &SolutionHistory,
    sys: &AssembledSystem,
    w: &WeightTable,
) -> Result<EnergyLedger> {
    if !w.matches(&h.grid) {
        return Err(Error::GridMismatch(format!(
            "history has {} steps, table covers {}",
            h.len(),
            w.len()
        )));
    }
    let n_steps = h.len();
    let k_mat = &sys.stiffness;
    let m_mat = &sys.mass;
    let a = |x: &[f64]| k_mat.inner(x, x);
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<f64>>();

    let ku: Vec<Vec<f64>> = h.u1.par_iter().map(|u| k_mat.mul_vec(u)).collect();
    let a_w = |n: usize, j: usize| -> f64 {
        h.u1[n]
            .iter()
            .zip(&h.u1[j])
            .zip(ku[n].iter().zip(&ku[j]))
            .map(|((un, uj), (kn, kj))| (un - uj) * (kn - kj))
            .sum()
    };
    // aw[n][j] = a(W_nj) for j < n
    let aw: Vec<Vec<f64>> = (0..=n_steps)
        .into_par_iter()
        .map(|n| (0..n).map(|j| a_w(n, j)).collect())
        .collect();
    let a_d: Vec<f64> = (0..=n_steps)
        .map(|n| if n == 0 { 0.0 } else { aw[n][n - 1] })
        .collect();
    let a_u: Vec<f64> = h.u1.iter().map(|u| a(u)).collect();

    let mut eta_dissipation = 0.0;
    for n in 1..=n_steps {
        eta_dissipation += -(w.eta(n) - w.eta(n - 1)) * a_u[n - 1] + w.eta(n) * a_d[n];
    }

    let mut history = 0.0;
    for n in 2..=n_steps {
        let k = w.step(n);
        let mut row = 0.0;
        for j in 1..n {
            let prev = if j == n - 1 { 0.0 } else { aw[n - 1][j] };
            row += w.omega(n, j) * (aw[n][j] - prev + a_d[n]);
        }
        history += row / k;
    }

    let mut by_parts = 0.0;
    if n_steps >= 2 {
        let nn = n_steps;
        for j in 1..nn {
            by_parts += w.omega(nn, j) / w.step(nn) * aw[nn][j];
            for n in (j + 2)..=nn {
                let kj = w.step(j);
                by_parts -= kj * (w.beta_avg(n, j) - w.beta_avg(n - 1, j)) * aw[n - 1][j];
            }
        }
        for n in 2..=nn {
            let s: f64 = w.row(n)[..n - 1].iter().sum();
            by_parts += s * a_d[n] / w.step(n);
        }
    }

    let jump_dissipation: f64 = (0..n_steps)
        .map(|n| {
            let d = diff(&h.u2[n + 1], &h.u2[n]);
            m_mat.inner(&d, &d)
        })
        .sum();

    Ok(EnergyLedger {
        final_elastic: w.eta(n_steps) * a_u[n_steps],
        final_kinetic: m_mat.inner(&h.u2[n_steps], &h.u2[n_steps]),
        eta_dissipation,
        history_dissipation: history,
        history_dissipation_by_parts: by_parts,
        jump_dissipation,
        initial_energy: a_u[0] + m_mat.inner(&h.u2[0], &h.u2[0]),
        load_work: h.load_work.iter().sum(),
    })
}

/// Tail statistics of a probe trace against the relaxed static response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongTimeLimit {
    /// Mean over the final quarter of `[0, T]`.
    pub tail_mean: f64,
    /// Static displacement with stiffness scaled by `1 - γ`.
    pub static_value: f64,
    /// `|tail_mean - static_value| / |static_value|`.
    pub gap: f64,
    /// Relative difference of the means over the two halves of the tail.
    pub tail_drift: f64,
    pub settled: bool,
}

/// Compare the tail mean of `component` at probe `probe` with the static
/// solve at scale `1 - γ` under the loads at `T`. Warns when the two halves
/// of the tail differ by more than `tolerance`.
pub fn long_time_limit(
    h: &SolutionHistory,
    sys: &AssembledSystem,
    gamma: f64,
    probe: usize,
    component: usize,
    tolerance: f64,
) -> Result<LongTimeLimit> {
    if probe >= h.probes.len() || component > 1 {
        return domain(format!(
            "no probe {probe} component {component} in the history"
        ));
    }
    let series = h.probe_series(probe, component);
    let nodes = h.grid.nodes();
    let end = h.grid.end();
    let start = nodes.partition_point(|&t| t < 0.75 * end);
    let middle = nodes.partition_point(|&t| t < 0.875 * end);
    let mean = |s: &[f64]| {
        if s.is_empty() {
            0.0
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    };
    let tail_mean = mean(&series[start..]);
    let (first, second) = (mean(&series[start..middle]), mean(&series[middle..]));
    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / b.abs().max(a.abs())
        }
    };
    let tail_drift = rel(first, second);
    let settled = tail_drift <= tolerance;
    let vertex = h.probes[probe].vertex;
    let static_full = quasi_static_solve(sys, 1.0 - gamma, end, SolverKind::Direct)?;
    let static_value = static_full[2 * vertex + component];
    let gap = if tail_mean == static_value {
        0.0
    } else {
        (tail_mean - static_value).abs() / static_value.abs()
    };
    if !settled {
        warn!(
            "tail mean not settled at T = {end}: halves differ by {:.1}% (tolerance {:.1}%)",
            100.0 * tail_drift,
            100.0 * tolerance
        );
    }
    Ok(LongTimeLimit {
        tail_mean,
        static_value,
        gap,
        tail_drift,
        settled,
    })
}
