//! Single-mode model `ρ u'' + κ u - κ ∫₀ᵗ β(t - s) u(s) ds = f(t)`.
//!
//! [`scalar_dg0`] runs the dG(0) recurrence on scalars. [`scalar_reference`]
//! is a second-order scheme from a different family: Crank–Nicolson for the
//! ODE part, with the memory term integrated exactly in both time variables
//! against the piecewise-linear interpolant of `u`.

use std::fmt;
use std::sync::Arc;

use crate::convergence::ConvergenceTable;
use crate::error::{domain, Error, Result};
use crate::mlf::{self, KernelParams};
use crate::weights::{build_weights, TimeGrid, WeightMode};

pub type ScalarForcing = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ScalarModel {
    pub rho: f64,
    pub kappa: f64,
    pub kernel: KernelParams,
    pub forcing: Option<ScalarForcing>,
    pub u0: f64,
    pub v0: f64,
}

impl fmt::Debug for ScalarModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarModel")
            .field("rho", &self.rho)
            .field("kappa", &self.kappa)
            .field("kernel", &self.kernel)
            .field("forcing", &self.forcing.is_some())
            .field("u0", &self.u0)
            .field("v0", &self.v0)
            .finish()
    }
}

impl ScalarModel {
    pub fn new(rho: f64, kappa: f64, kernel: KernelParams, u0: f64, v0: f64) -> Result<Self> {
        let m = Self {
            rho,
            kappa,
            kernel,
            forcing: None,
            u0,
            v0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_forcing(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return domain(format!("rho must be positive (got {})", self.rho));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return domain(format!("kappa must be positive (got {})", self.kappa));
        }
        if !(self.u0.is_finite() && self.v0.is_finite()) {
            return domain("initial data must be finite");
        }
        self.kernel.validate()
    }

    fn force(&self, t: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f(t))
    }
}

/// Displacement and velocity at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrace {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl ScalarTrace {
    pub fn last_u(&self) -> f64 {
        *self.u.last().unwrap()
    }
}

/// dG(0) on `grid` with closed-form weights.
pub fn scalar_dg0(m: &ScalarModel, grid: &TimeGrid) -> Result<ScalarTrace> {
    scalar_dg0_with(m, grid, WeightMode::ClosedForm)
}

pub fn scalar_dg0_with(m: &ScalarModel, grid: &TimeGrid, mode: WeightMode) -> Result<ScalarTrace> {
    m.validate()?;
    let w = build_weights(grid, &m.kernel, mode)?;
    let n_steps = grid.len();
    let mut u = Vec::with_capacity(n_steps + 1);
    let mut v = Vec::with_capacity(n_steps + 1);
    u.push(m.u0);
    v.push(m.v0);
    for n in 1..=n_steps {
        let k = w.step(n);
        let row = w.row(n);
        let elastic = k - row[n - 1];
        let history: f64 = row[..n - 1].iter().zip(&u[1..n]).map(|(a, b)| a * b).sum();
        let f_bar = m.force(grid.t(n - 1) + 0.5 * (grid.t(n) - grid.t(n - 1)));
        let rhs = m.rho * v[n - 1] - elastic * m.kappa * u[n - 1] + m.kappa * history + k * f_bar;
        let vn = rhs / (m.rho + k * elastic * m.kappa);
        v.push(vn);
        u.push(u[n - 1] + k * vn);
    }
    Ok(ScalarTrace {
        t: grid.nodes().to_vec(),
        u,
        v,
    })
}

/// Hat-moment weights on a uniform step `h` for lags `0..n`: on the source
/// subinterval `m` at lag `L = n - m`, `(rise, fall)` multiply `u_m` and `u_{m-1}`.
fn product_weights(p: &KernelParams, h: f64, n: usize) -> Vec<(f64, f64)> {
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .map(|lag| {
            let gap = (lag > 0).then(|| (lag - 1) as f64 * h);
            mlf::hat_moments(p, gap, h)
        })
        .collect()
}

/// Crank–Nicolson on `n` uniform steps of size `h`, with the memory term
/// integrated exactly in both time variables against the piecewise-linear
/// displacement. No Richardson checks; see [`scalar_reference`].
pub fn product_trapezoid(m: &ScalarModel, h: f64, n: usize) -> Result<ScalarTrace> {
    // the memory behaves like t^α near zero, so a pointwise trapezoid in the
    // outer variable would cap the order at 1 + α
    let weights = product_weights(&m.kernel, h, n);
    let (rho, kappa) = (m.rho, m.kappa);
    let rise0 = weights[0].0;
    let c = kappa * (0.5 * h - rise0);
    let lhs = rho + 0.5 * h * c;
    let mut u = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    u.push(m.u0);
    v.push(m.v0);
    let mut f_prev = m.force(0.0);
    for step in 1..=n {
        let t = step as f64 * h;
        // known part of the memory over the step: every node except u_n
        let mut s = 0.0;
        for mm in 1..=step {
            let (rise, fall) = weights[step - mm];
            s += fall * u[mm - 1];
            if mm < step {
                s += rise * u[mm];
            }
        }
        let f_now = m.force(t);
        let (u_prev, v_prev) = (u[step - 1], v[step - 1]);
        let rhs = rho * v_prev - c * (u_prev + 0.5 * h * v_prev) - 0.5 * h * kappa * u_prev
            + kappa * s
            + 0.5 * h * (f_now + f_prev);
        let vn = rhs / lhs;
        let un = u_prev + 0.5 * h * (vn + v_prev);
        f_prev = f_now;
        u.push(un);
        v.push(vn);
    }
    Ok(ScalarTrace {
        t: (0..=n).map(|i| i as f64 * h).collect(),
        u,
        v,
    })
}

/// Reference trace with its Richardson diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub trace: ScalarTrace,
    pub step: f64,
    /// `|u_h(T) - u_{2h}(T)| / 3`
    pub error_estimate: f64,
    /// `log2((u_{4h} - u_{2h}) / (u_{2h} - u_h))` at `T`; `None` when the differences vanish.
    pub order: Option<f64>,
}

impl ReferenceSolution {
    pub fn value_at_end(&self) -> f64 {
        self.trace.last_u()
    }
}

pub const DEFAULT_REFERENCE_STEP: f64 = 1.0 / 4096.0;

/// Reference solution on `[0, end]` with step `step`, checked by Richardson
/// extrapolation over `step`, `2 step`, `4 step`: the observed order must lie in
/// `[1.8, 2.2]` and the error estimate must not exceed `1e-6` relative to the
/// trace's scale.
pub fn scalar_reference(m: &ScalarModel, end: f64, step: f64) -> Result<ReferenceSolution> {
    m.validate()?;
    let n = (end / step).round() as usize;
    if n < 4 || !n.is_multiple_of(4) || ((n as f64) * step - end).abs() > 1e-12 * end {
        return domain(format!(
            "reference step {step} must divide T = {end} into a multiple of 4 steps"
        ));
    }
    let (fine, (mid, coarse)) = rayon::join(
        || product_trapezoid(m, step, n),
        || {
            rayon::join(
                || product_trapezoid(m, 2.0 * step, n / 2),
                || product_trapezoid(m, 4.0 * step, n / 4),
            )
        },
    );
    let (fine, mid, coarse) = (fine?, mid?, coarse?);
    let (u1, u2, u4) = (fine.last_u(), mid.last_u(), coarse.last_u());
    let error_estimate = (u1 - u2).abs() / 3.0;
    let scale = fine.u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let (d_fine, d_coarse) = ((u2 - u1).abs(), (u4 - u2).abs());
    let order = if scale == 0.0 || d_fine <= 1e-14 * scale {
        None
    } else {
        Some((d_coarse / d_fine).log2())
    };
    if let Some(p) = order {
        if !(1.8..=2.2).contains(&p) {
            return Err(Error::Reference(format!(
                "observed order {p:.3} outside [1.8, 2.2]"
            )));
        }
    }
    if error_estimate > 1e-6 * scale.max(1e-300) {
        return Err(Error::Reference(format!(
            "estimated error {error_estimate:.3e} exceeds 1e-6 of the solution scale {scale:.3e}"
        )));
    }
    Ok(ReferenceSolution {
        trace: fine,
        step,
        error_estimate,
        order,
    })
}

/// dG(0) errors at `T` against the reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarStudy {
    pub table: ConvergenceTable,
    pub reference: ReferenceSolution,
    pub end: f64,
}

/// Step used for the reference of a study whose finest step is `k_min`:
/// at most `k_min / 32` and [`DEFAULT_REFERENCE_STEP`], dividing `end` into a
/// multiple of four steps.
pub fn reference_step_for(end: f64, k_min: f64) -> f64 {
    let target = DEFAULT_REFERENCE_STEP.min(k_min / 32.0);
    let n = ((end / target).ceil() as usize).div_ceil(4) * 4;
    end / n as f64
}

/// Errors `|U1_N - u_ref(T)|` of [`scalar_dg0_with`] on uniform grids with the
/// given steps, in decreasing order, each dividing `end`.
pub fn convergence_study(
    m: &ScalarModel,
    end: f64,
    steps: &[f64],
    mode: WeightMode,
) -> Result<ScalarStudy> {
    use rayon::prelude::*;
    m.validate()?;
    if steps.is_empty() || steps.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return domain("step sizes must be positive and finite");
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return domain("step sizes must strictly decrease");
    }
    crate::convergence::check_divides(end, steps)?;
    let k_min = *steps.last().unwrap();
    let (reference, finals) = rayon::join(
        || scalar_reference(m, end, reference_step_for(end, k_min)),
        || {
            steps
                .par_iter()
                .map(|&k| {
                    let grid = TimeGrid::with_step(end, k)?;
                    Ok(scalar_dg0_with(m, &grid, mode)?.last_u())
                })
                .collect::<Result<Vec<f64>>>()
        },
    );
    let (reference, finals) = (reference?, finals?);
    let target = reference.value_at_end();
    let errors: Vec<f64> = finals.iter().map(|u| (u - target).abs()).collect();
    Ok(ScalarStudy {
        table: ConvergenceTable::from_errors(steps, &errors),
        reference,
        end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(gamma: f64) -> ScalarModel {
        ScalarModel::new(
            1.0,
            1.0,
            KernelParams::new(2.0 / 3.0, 1.0, gamma).unwrap(),
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_data() {
        let m = ScalarModel::new(1.0, 1.0, KernelParams::standard(), 0.0, 0.0).unwrap();
        let g = TimeGrid::uniform(2.0, 16).unwrap();
        assert!(scalar_dg0(&m, &g).unwrap().u.iter().all(|&x| x == 0.0));
        let r = scalar_reference(&m, 1.0, 1.0 / 64.0).unwrap();
        assert!(r.trace.u.iter().all(|&x| x == 0.0));
        assert_eq!(r.order, None);
    }

    #[test]
    fn invalid_models() {
        assert!(ScalarModel::new(0.0, 1.0, KernelParams::standard(), 0.0, 0.0).is_err());
        assert!(ScalarModel::new(1.0, -1.0, KernelParams::standard(), 0.0, 0.0).is_err());
        assert!(ScalarModel::new(1.0, 1.0, KernelParams::standard(), f64::NAN, 0.0).is_err());
        let m = model(0.5);
        assert!(scalar_reference(&m, 1.0, 0.3).is_err());
    }

    #[test]
    fn elastic_dg0_energy_bounded() {
        let m = model(0.0);
        let g = TimeGrid::uniform(20.0, 200).unwrap();
        let tr = scalar_dg0(&m, &g).unwrap();
        let e: Vec<f64> = tr.u.iter().zip(&tr.v).map(|(u, v)| u * u + v * v).collect();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-14));
        }
    }

    #[test]
    fn reference_reproduces_cosine() {
        let m = ScalarModel::new(
            2.0,
            8.0,
            KernelParams::new(0.5, 1.0, 0.0).unwrap(),
            1.0,
            0.0,
        )
        .unwrap();
        let r = scalar_reference(&m, 4.0, 1.0 / 4096.0).unwrap();
        let p = r.order.unwrap();
        assert!((1.9..=2.1).contains(&p), "{p}");
        for (t, u) in r.trace.t.iter().zip(&r.trace.u) {
            assert!((u - (2.0 * t).cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn forced_reference_matches_particular_solution() {
        // u = sin t solves u'' + 4u = 3 sin t with u0 = 0, v0 = 1
        let m = ScalarModel::new(
            1.0,
            4.0,
            KernelParams::new(0.5, 1.0, 0.0).unwrap(),
            0.0,
            1.0,
        )
        .unwrap()
        .with_forcing(|t| 3.0 * t.sin());
        let r = scalar_reference(&m, 2.0, 1.0 / 512.0).unwrap();
        assert!((r.value_at_end() - 2f64.sin()).abs() < 1e-5);
    }

    #[test]
    fn study_zero_data_is_degenerate() {
        let m = ScalarModel::new(1.0, 1.0, KernelParams::standard(), 0.0, 0.0).unwrap();
        let s = convergence_study(&m, 1.0, &[0.25, 0.125], WeightMode::ClosedForm).unwrap();
        assert!(s.table.is_degenerate());
        assert!(s.table.rows.iter().all(|r| r.order.is_none()));
    }

    #[test]
    fn study_rejects_bad_steps() {
        let m = model(0.5);
        assert!(convergence_study(&m, 1.0, &[], WeightMode::ClosedForm).is_err());
        assert!(convergence_study(&m, 1.0, &[0.125, 0.25], WeightMode::ClosedForm).is_err());
        assert!(convergence_study(&m, 1.0, &[0.3], WeightMode::ClosedForm).is_err());
    }

    #[test]
    fn reference_step_divides_interval() {
        for &(end, k) in &[(4.0, 1.0 / 128.0), (1.0, 0.25), (3.0, 0.1)] {
            let r = reference_step_for(end, k);
            assert!(r <= k / 32.0 && r <= DEFAULT_REFERENCE_STEP);
            let n = end / r;
            assert!((n - n.round()).abs() < 1e-9 && (n.round() as usize).is_multiple_of(4));
        }
    }

    #[test]
    fn dg0_approaches_reference() {
        let m = model(0.5);
        let r = scalar_reference(&m, 2.0, 1.0 / 1024.0).unwrap();
        let e = |n: usize| {
            (scalar_dg0(&m, &TimeGrid::uniform(2.0, n).unwrap())
                .unwrap()
                .last_u()
                - r.value_at_end())
            .abs()
        };
        let (a, b) = (e(16), e(32));
        assert!(b < a);
        assert!((a / b).log2() > 0.7);
    }
}
