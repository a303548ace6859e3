//! Time grids and the convolution weight table.
//!
//! For a grid `0 = t_0 < … < t_N` with intervals `I_n = (t_{n-1}, t_n)` the
//! history weights are
//!
//! ```text
//! ω_nj = ∫_{I_n} ∫_{t_{j-1}}^{min(t_j, t)} β(t - s) ds dt,   1 ≤ j ≤ n,
//! ```
//!
//! and the averaged relaxation values are `η_n = 1 - (Σ_j ω_nj) / k_n`,
//! `η_0 = 1`. Deriving `η_n` from the row sums makes the discrete energy
//! identity hold to rounding.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::mlf::{self, KernelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform_step: Option<f64>,
}

impl TimeGrid {
    /// `n` equal steps on `[0, end]`.
    pub fn uniform(end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(end > 0.0 && end.is_finite()) {
            return domain(format!(
                "uniform grid needs end > 0 and n ≥ 1 (got {end}, {n})"
            ));
        }
        let k = end / n as f64;
        let nodes = (0..=n).map(|i| i as f64 * k).collect();
        Ok(Self {
            nodes,
            uniform_step: Some(k),
        })
    }

    /// Uniform grid with step `k` up to the first node `≥ end - k/2`.
    pub fn with_step(end: f64, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return domain(format!("time step must be positive (got {k})"));
        }
        let n = (end / k).round().max(1.0) as usize;
        let mut g = Self::uniform(n as f64 * k, n)?;
        g.uniform_step = Some(k);
        Ok(g)
    }

    /// `t_n = end (n / n_steps)^exponent`, refined towards `t = 0` for `exponent > 1`.
    pub fn graded(end: f64, n_steps: usize, exponent: f64) -> Result<Self> {
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return domain(format!(
                "grading exponent must be at least 1 (got {exponent})"
            ));
        }
        if exponent == 1.0 {
            return Self::uniform(end, n_steps);
        }
        if n_steps == 0 || !(end > 0.0 && end.is_finite()) {
            return domain(format!(
                "graded grid needs end > 0 and n ≥ 1 (got {end}, {n_steps})"
            ));
        }
        let n = n_steps as f64;
        let mut nodes: Vec<f64> = (0..=n_steps)
            .map(|i| end * (i as f64 / n).powf(exponent))
            .collect();
        nodes[n_steps] = end;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return domain("a time grid needs at least two nodes");
        }
        if nodes[0] != 0.0 {
            return domain(format!("first node must be 0 (got {})", nodes[0]));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return domain(format!(
                    "nodes must increase strictly (t_{} = {}, t_{} = {})",
                    i,
                    w[0],
                    i + 1,
                    w[1]
                ));
            }
        }
        Ok(Self {
            nodes,
            uniform_step: None,
        })
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    pub fn end(&self) -> f64 {
        self.nodes[self.len()]
    }

    /// `k_n = t_n - t_{n-1}` for `1 ≤ n ≤ N`; the nominal step on uniform grids.
    pub fn step(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        match self.uniform_step {
            Some(k) => k,
            None => self.nodes[n] - self.nodes[n - 1],
        }
    }

    pub fn uniform_step(&self) -> Option<f64> {
        self.uniform_step
    }

    pub fn max_step(&self) -> f64 {
        (1..=self.len()).map(|n| self.step(n)).fold(0.0, f64::max)
    }

    /// Gap `t_{n-1} - t_j` between the end of `I_j` and the start of `I_n`.
    fn gap(&self, n: usize, j: usize) -> f64 {
        match self.uniform_step {
            Some(k) => (n - 1 - j) as f64 * k,
            None => self.nodes[n - 1] - self.nodes[j],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Exact double integrals via the second primitive of the kernel.
    #[default]
    ClosedForm,
    /// Outer integral over `I_n` by one midpoint evaluation, inner integral exact.
    Midpoint,
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" => Ok(Self::ClosedForm),
            "midpoint" => Ok(Self::Midpoint),
            _ => domain(format!(
                "unknown weight mode '{s}' (expected closed_form or midpoint)"
            )),
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClosedForm => "closed_form",
            Self::Midpoint => "midpoint",
        })
    }
}

/// Lower-triangular `ω_nj` (`1 ≤ j ≤ n ≤ N`) and `η_n` (`0 ≤ n ≤ N`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    omega: Vec<f64>,
    eta: Vec<f64>,
    steps: Vec<f64>,
    mode: WeightMode,
    params: KernelParams,
    nodes: Vec<f64>,
}

impl WeightTable {
    pub fn len(&self) -> usize {
        self.eta.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// `ω_nj` for `1 ≤ j ≤ n`.
    pub fn omega(&self, n: usize, j: usize) -> f64 {
        assert!(
            1 <= j && j <= n && n <= self.len(),
            "ω index ({n}, {j}) out of range"
        );
        self.omega[row_offset(n) + j - 1]
    }

    /// Row `n`: entry `j - 1` holds `ω_nj`.
    pub fn row(&self, n: usize) -> &[f64] {
        assert!(1 <= n && n <= self.len());
        &self.omega[row_offset(n)..row_offset(n) + n]
    }

    pub fn eta(&self, n: usize) -> f64 {
        self.eta[n]
    }

    pub fn etas(&self) -> &[f64] {
        &self.eta
    }

    /// Step `k_n` the table was built with.
    pub fn step(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    /// `β_nj = ω_nj / (k_n k_j)`.
    pub fn beta_avg(&self, n: usize, j: usize) -> f64 {
        self.omega(n, j) / (self.step(n) * self.step(j))
    }

    pub fn matches(&self, grid: &TimeGrid) -> bool {
        self.nodes == grid.nodes
    }
}

fn row_offset(n: usize) -> usize {
    n * (n - 1) / 2
}

fn diagonal(p: &KernelParams, mode: WeightMode, k: f64) -> f64 {
    match mode {
        WeightMode::ClosedForm => mlf::double_primitive(p, k),
        WeightMode::Midpoint => k * mlf::primitive_increment(p, 0.0, 0.5 * k),
    }
}

fn off_diagonal(p: &KernelParams, mode: WeightMode, gap: f64, kn: f64, kj: f64) -> f64 {
    match mode {
        WeightMode::ClosedForm => mlf::double_primitive_rectangle(p, gap, kn, kj),
        WeightMode::Midpoint => kn * mlf::primitive_increment(p, gap + 0.5 * kn, kj),
    }
}

/// Build `ω_nj` and `η_n` on `grid`.
///
/// Uniform grids need one kernel evaluation per lag `n - j`; general grids
/// evaluate every entry, in parallel over rows.
pub fn build_weights(grid: &TimeGrid, p: &KernelParams, mode: WeightMode) -> Result<WeightTable> {
    p.validate()?;
    let n_steps = grid.len();
    let steps: Vec<f64> = (1..=n_steps).map(|n| grid.step(n)).collect();
    let rows: Vec<Vec<f64>> = match grid.uniform_step() {
        Some(k) => {
            let lags: Vec<f64> = (0..n_steps)
                .into_par_iter()
                .map(|m| {
                    if m == 0 {
                        diagonal(p, mode, k)
                    } else {
                        off_diagonal(p, mode, (m - 1) as f64 * k, k, k)
                    }
                })
                .collect();
            (1..=n_steps)
                .map(|n| (1..=n).map(|j| lags[n - j]).collect())
                .collect()
        }
        None => (1..=n_steps)
            .into_par_iter()
            .map(|n| {
                (1..=n)
                    .map(|j| {
                        if j == n {
                            diagonal(p, mode, steps[n - 1])
                        } else {
                            off_diagonal(p, mode, grid.gap(n, j), steps[n - 1], steps[j - 1])
                        }
                    })
                    .collect()
            })
            .collect(),
    };

    let mut omega = Vec::with_capacity(row_offset(n_steps + 1));
    let mut eta = Vec::with_capacity(n_steps + 1);
    eta.push(1.0);
    for (n, row) in rows.into_iter().enumerate() {
        let k = steps[n];
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || row.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain(format!(
                "weight row {} is not finite and nonnegative",
                n + 1
            )));
        }
        eta.push(1.0 - sum / k);
        omega.extend(row);
    }
    Ok(WeightTable {
        omega,
        eta,
        steps,
        mode,
        params: *p,
        nodes: grid.nodes.clone(),
    })
}

/// Outcome of [`verify_sign_structure`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignReport {
    /// `γ = 0`: all differences vanish, nothing to check.
    pub degenerate: bool,
    /// Steps `n` with `∂_n η_n ≥ 0`.
    pub eta_violations: Vec<usize>,
    /// Pairs `(n, j)`, `j < n - 1`, with `∂_n β_nj ≥ 0`.
    pub beta_violations: Vec<(usize, usize)>,
    /// Largest (closest to zero) value of `∂_n η_n`.
    pub max_eta_difference: f64,
    /// Largest (closest to zero) value of `∂_n β_nj`.
    pub max_beta_difference: f64,
}

impl SignReport {
    pub fn passed(&self) -> bool {
        self.eta_violations.is_empty() && self.beta_violations.is_empty()
    }
}

impl fmt::Display for SignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degenerate {
            return write!(f, "degenerate (gamma = 0): all differences vanish");
        }
        write!(
            f,
            "{} eta violations, {} beta violations (max d_eta = {:e}, max d_beta = {:e})",
            self.eta_violations.len(),
            self.beta_violations.len(),
            self.max_eta_difference,
            self.max_beta_difference
        )
    }
}

/// Check the monotonicity the energy estimate relies on: `∂_n η_n < 0` for all
/// `n ≥ 1` and `∂_n β_nj < 0` for all `j < n - 1`.
pub fn verify_sign_structure(w: &WeightTable, grid: &TimeGrid) -> Result<SignReport> {
    if !w.matches(grid) {
        return Err(Error::GridMismatch(format!(
            "table has {} steps, grid has {}",
            w.len(),
            grid.len()
        )));
    }
    let mut report = SignReport {
        degenerate: w.params.gamma == 0.0,
        max_eta_difference: f64::NEG_INFINITY,
        max_beta_difference: f64::NEG_INFINITY,
        ..Default::default()
    };
    if report.degenerate {
        return Ok(report);
    }
    for n in 1..=w.len() {
        let d = (w.eta(n) - w.eta(n - 1)) / w.step(n);
        report.max_eta_difference = report.max_eta_difference.max(d);
        if !(d < 0.0) {
            report.eta_violations.push(n);
        }
        for j in 1..n.saturating_sub(1) {
            let d = (w.beta_avg(n, j) - w.beta_avg(n - 1, j)) / w.step(n);
            report.max_beta_difference = report.max_beta_difference.max(d);
            if !(d < 0.0) {
                report.beta_violations.push((n, j));
            }
        }
    }
    Ok(report)
}
