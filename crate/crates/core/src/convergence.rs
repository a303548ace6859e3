//! Observed temporal convergence orders: tables of `(k, error, order)` and the
//! self-convergence study for the finite element stepper.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::fem::AssembledSystem;
use crate::mlf::KernelParams;
use crate::stepper::{run, StepperOptions};
use crate::weights::{build_weights, TimeGrid, WeightMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub k: f64,
    pub error: f64,
    /// Order against the previous (coarser) row; `None` on the first row or
    /// when either error vanishes.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// `ln(e_a / e_b) / ln(k_a / k_b)`, or `None` if an error is zero or not finite.
/// Fails unless every step divides `end` into a whole number of steps.
pub(crate) fn check_divides(end: f64, steps: &[f64]) -> Result<()> {
    for &k in steps {
        let n = end / k;
        if !(n.is_finite() && n >= 0.5 && (n - n.round()).abs() <= 1e-9 * n) {
            return domain(format!("step {k} does not divide T = {end}"));
        }
    }
    Ok(())
}

pub fn observed_order(k_a: f64, e_a: f64, k_b: f64, e_b: f64) -> Option<f64> {
    let ok = |e: f64| e > 0.0 && e.is_finite();
    (ok(e_a) && ok(e_b) && k_a != k_b).then(|| (e_a / e_b).ln() / (k_a / k_b).ln())
}

/// Least-squares slope of `ln y` against `ln x` over the pairs with both
/// entries positive; `None` with fewer than two such pairs.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl ConvergenceTable {
    pub fn from_errors(steps: &[f64], errors: &[f64]) -> Self {
        assert_eq!(steps.len(), errors.len(), "one error per step");
        let rows = steps
            .iter()
            .zip(errors)
            .enumerate()
            .map(|(i, (&k, &error))| ConvergenceRow {
                k,
                error,
                order: (i > 0)
                    .then(|| observed_order(steps[i - 1], errors[i - 1], k, error))
                    .flatten(),
            })
            .collect();
        Self { rows }
    }

    pub fn steps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.k).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// All errors are exactly zero, so no order is defined.
    pub fn is_degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.error == 0.0)
    }

    /// Order between the two finest rows.
    pub fn finest_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    pub fn slope(&self) -> Option<f64> {
        log_log_slope(&self.steps(), &self.errors())
    }

    /// Errors strictly decrease as `k` decreases.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Self-convergence of the finite element stepper against a fine run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvergence {
    /// Errors `‖U1_N(k) - U1_N(k_min)‖` in the unweighted `L2` norm.
    pub table: ConvergenceTable,
    pub k_min: f64,
    /// Orders from three consecutive runs (the fine run included), free of
    /// the bias that the fine run introduces into the table's slope.
    pub successive_orders: Vec<Option<f64>>,
    /// Least-squares slope of the errors against `k - k_min`.
    pub shifted_slope: Option<f64>,
}

/// Run the stepper on `[0, end]` for every step in `steps` and for `k_min`,
/// and compare the final displacements.
#[allow(clippy::too_many_arguments)]
pub fn fem_self_convergence(
    sys: &AssembledSystem,
    kernel: &KernelParams,
    end: f64,
    steps: &[f64],
    k_min: f64,
    mode: WeightMode,
    u0: &[f64],
    v0: &[f64],
    opts: &StepperOptions,
) -> Result<SelfConvergence> {
    if steps.is_empty() {
        return domain("at least one step size is required");
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) || steps.last().is_some_and(|&k| k <= k_min) {
        return domain("step sizes must strictly decrease and stay above k_min");
    }
    let mut all = steps.to_vec();
    all.push(k_min);
    check_divides(end, &all)?;
    let finals = all
        .par_iter()
        .map(|&k| {
            let grid = TimeGrid::with_step(end, k)?;
            let w = build_weights(&grid, kernel, mode)?;
            let mut o = opts.clone();
            o.probes.clear();
            let h = run(sys, &grid, &w, u0, v0, o)?;
            Ok(h.u1.last().cloned().unwrap_or_default())
        })
        .collect::<Result<Vec<_>>>()?;
    let rho = sys.params.rho;
    let dist = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        (sys.mass.inner(&d, &d) / rho).max(0.0).sqrt()
    };
    let fine = finals.last().unwrap();
    let errors: Vec<f64> = finals[..steps.len()]
        .iter()
        .map(|u| dist(u, fine))
        .collect();
    let successive_orders = (0..all.len().saturating_sub(2))
        .map(|i| {
            let d1 = dist(&finals[i], &finals[i + 1]);
            let d2 = dist(&finals[i + 1], &finals[i + 2]);
            observed_order(all[i], d1, all[i + 1], d2)
        })
        .collect();
    let shifted: Vec<f64> = steps.iter().map(|k| k - k_min).collect();
    Ok(SelfConvergence {
        table: ConvergenceTable::from_errors(steps, &errors),
        k_min,
        successive_orders,
        shifted_slope: log_log_slope(&shifted, &errors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law() {
        let ks = [0.5, 0.25, 0.125, 0.0625];
        let es: Vec<f64> = ks.iter().map(|k| 3.0 * k * k).collect();
        let t = ConvergenceTable::from_errors(&ks, &es);
        assert_eq!(t.rows[0].order, None);
        for r in &t.rows[1..] {
            assert_relative_eq!(r.order.unwrap(), 2.0, epsilon = 1e-12);
        }
        assert_relative_eq!(t.slope().unwrap(), 2.0, epsilon = 1e-12);
        assert!(t.is_monotone() && !t.is_degenerate());
    }

    #[test]
    fn zero_errors_flagged() {
        let t = ConvergenceTable::from_errors(&[0.5, 0.25], &[0.0, 0.0]);
        assert!(t.is_degenerate());
        assert_eq!(t.finest_order(), None);
        assert_eq!(t.slope(), None);
    }

    #[test]
    fn fine_run_biases_slope() {
        // an exactly first-order method measured against a k_min run
        let k_min = 1.0 / 64.0;
        let ks = [0.25, 0.125, 0.0625, 0.03125];
        let es: Vec<f64> = ks.iter().map(|k| k - k_min).collect();
        let biased = log_log_slope(&ks, &es).unwrap();
        assert!(biased > 1.2, "{biased}");
        let shifted: Vec<f64> = ks.iter().map(|k| k - k_min).collect();
        assert_relative_eq!(log_log_slope(&shifted, &es).unwrap(), 1.0, epsilon = 1e-12);
    }
}
