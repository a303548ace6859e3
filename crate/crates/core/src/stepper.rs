//! The fully discrete dG(0) scheme.
//!
//! Step `n` solves for the velocity
//!
//! ```text
//! [M + k_n (k_n - ω_nn) K] U2_n = M U2_{n-1} - (k_n - ω_nn) K U1_{n-1} + K H_n + k_n (F̄_n + Ḡ_n),
//! H_n = Σ_{j<n} ω_nj U1_j,
//! ```
//!
//! then sets `U1_n = U1_{n-1} + k_n U2_n`. `M` already carries the density.
//! Each step costs one SPD solve plus an `O(n · dofs)` history sum, so a run
//! is `O(N² · dofs)` overall.

use log::debug;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::fem::sparse::{dot, CsrMatrix};
use crate::fem::{apply_dirichlet, AssembledSystem, LinearSolver, ReducedSystem, SolverKind};
use crate::weights::{TimeGrid, WeightTable};

const CACHE_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct StepperOptions {
    pub solver: SolverKind,
    /// Required relative residual of every step solve.
    pub residual_tol: f64,
    /// Vertices whose displacement and velocity are traced.
    pub probes: Vec<usize>,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            solver: SolverKind::Auto,
            residual_tol: 1e-10,
            probes: Vec::new(),
        }
    }
}

/// Time-averaged loads `(F̄_n, Ḡ_n)` over `I_n` by the midpoint rule.
pub fn time_average_load(sys: &AssembledSystem, grid: &TimeGrid, n: usize) -> (Vec<f64>, Vec<f64>) {
    let t = grid.t(n - 1) + 0.5 * (grid.t(n) - grid.t(n - 1));
    (sys.volume_load(t), sys.traction_load(t))
}

/// Displacement and velocity of one vertex at every node `t_0..t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub vertex: usize,
    pub point: [f64; 2],
    pub u1: Vec<[f64; 2]>,
    pub u2: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct SolutionHistory {
    pub grid: TimeGrid,
    /// `U1_n`, `n = 0..=N`, full dof vectors; `U1_0 = u0`.
    pub u1: Vec<Vec<f64>>,
    /// `U2_n`, `n = 0..=N`; `U2_0 = v0`.
    pub u2: Vec<Vec<f64>>,
    /// `2 k_n (F̄_n + Ḡ_n) · U2_n` for `n = 1..=N` (entry `n - 1`).
    pub load_work: Vec<f64>,
    /// Relative residual of each step solve.
    pub residuals: Vec<f64>,
    pub probes: Vec<ProbeTrace>,
}

impl SolutionHistory {
    pub fn len(&self) -> usize {
        self.u1.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|U1_n - U1_{n-1} - k_n U2_n|` over all steps and dofs.
    pub fn kinematic_defect(&self) -> f64 {
        (1..=self.len())
            .map(|n| {
                let k = self.grid.step(n);
                self.u1[n]
                    .iter()
                    .zip(&self.u1[n - 1])
                    .zip(&self.u2[n])
                    .fold(0.0f64, |m, ((a, b), v)| m.max((a - b - k * v).abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Vertical or horizontal displacement trace at a probe.
    pub fn probe_series(&self, probe: usize, component: usize) -> Vec<f64> {
        self.probes[probe].u1.iter().map(|u| u[component]).collect()
    }
}

/// Marching state: reduced vectors, cached step factorizations.
pub struct Stepper<'a> {
    sys: &'a AssembledSystem,
    grid: &'a TimeGrid,
    weights: &'a WeightTable,
    reduced: ReducedSystem,
    opts: StepperOptions,
    cache: Vec<(u64, LinearSolver)>,
    u1: Vec<Vec<f64>>,
    u2: Vec<f64>,
    n: usize,
}

/// Result of one [`Stepper::advance`] call, full dof vectors.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub n: usize,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub load_work: f64,
    pub residual: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a AssembledSystem,
        grid: &'a TimeGrid,
        weights: &'a WeightTable,
        u0: &[f64],
        v0: &[f64],
        opts: StepperOptions,
    ) -> Result<Self> {
        if !weights.matches(grid) {
            return Err(Error::GridMismatch(format!(
                "table covers {} steps, grid has {}",
                weights.len(),
                grid.len()
            )));
        }
        let n = sys.n_dofs();
        if u0.len() != n || v0.len() != n {
            return domain(format!("initial data must have {n} entries"));
        }
        if let Some(&p) = opts.probes.iter().find(|&&p| p >= sys.mesh.n_vertices()) {
            return domain(format!("probe vertex {p} does not exist"));
        }
        let reduced = apply_dirichlet(sys)?;
        let violation = reduced
            .constraints
            .violation(u0)
            .max(reduced.constraints.violation(v0));
        if violation != 0.0 {
            return domain(format!(
                "initial data violate the Dirichlet constraints by {violation}"
            ));
        }
        let u1 = vec![reduced.constraints.restrict(u0)];
        let u2 = reduced.constraints.restrict(v0);
        Ok(Self {
            sys,
            grid,
            weights,
            reduced,
            opts,
            cache: Vec::new(),
            u1,
            u2,
            n: 0,
        })
    }

    /// Index of the last completed step.
    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn reduced(&self) -> &ReducedSystem {
        &self.reduced
    }

    fn solver_for(&mut self, coefficient: f64) -> Result<&LinearSolver> {
        let key = coefficient.to_bits();
        if let Some(pos) = self.cache.iter().position(|(k, _)| *k == key) {
            return Ok(&self.cache[pos].1);
        }
        let matrix = CsrMatrix::linear_combination(
            1.0,
            &self.reduced.mass,
            coefficient,
            &self.reduced.stiffness,
        );
        let solver = LinearSolver::new(matrix, self.opts.solver)?;
        debug!("factored step matrix with coefficient {coefficient:e}");
        if self.cache.len() == CACHE_SIZE {
            self.cache.remove(0);
        }
        self.cache.push((key, solver));
        Ok(&self.cache.last().unwrap().1)
    }

    /// `H_n = Σ_{j<n} ω_nj U1_j`, data-parallel over dofs.
    fn history_sum(&self, n: usize) -> Vec<f64> {
        let row = &self.weights.row(n)[..n - 1];
        let m = self.reduced.constraints.n_free();
        let mut h = vec![0.0; m];
        h.par_chunks_mut(256).enumerate().for_each(|(c, chunk)| {
            let base = c * 256;
            for (j, w) in row.iter().enumerate() {
                let u = &self.u1[j + 1][base..base + chunk.len()];
                for (hi, ui) in chunk.iter_mut().zip(u) {
                    *hi += w * ui;
                }
            }
        });
        h
    }

    pub fn advance(&mut self) -> Result<StepOutput> {
        let n = self.n + 1;
        if n > self.grid.len() {
            return domain(format!("grid has only {} steps", self.grid.len()));
        }
        self.advance_inner(n).map_err(|e| Error::Step {
            step: n,
            source: Box::new(e),
        })
    }

    fn advance_inner(&mut self, n: usize) -> Result<StepOutput> {
        let k = self.weights.step(n);
        let w_nn = self.weights.omega(n, n);
        let elastic = k - w_nn;
        let (f_bar, g_bar) = time_average_load(self.sys, self.grid, n);
        let load: Vec<f64> = f_bar.iter().zip(&g_bar).map(|(a, b)| a + b).collect();
        let load_red = self.reduced.constraints.restrict(&load);

        let u1_prev = self.u1.last().unwrap();
        let mut stiff_arg = self.history_sum(n);
        for (h, u) in stiff_arg.iter_mut().zip(u1_prev) {
            *h -= elastic * u;
        }
        let mut rhs = self.reduced.stiffness.mul_vec(&stiff_arg);
        let mass_part = self.reduced.mass.mul_vec(&self.u2);
        for ((r, m), l) in rhs.iter_mut().zip(&mass_part).zip(&load_red) {
            *r += m + k * l;
        }

        let tol = self.opts.residual_tol;
        let guess = self.u2.clone();
        let solver = self.solver_for(k * elastic)?;
        let u2 = solver.solve(&rhs, Some(&guess), tol)?;
        let residual = relative_residual(solver.matrix(), &u2, &rhs);

        let u1: Vec<f64> = self
            .u1
            .last()
            .unwrap()
            .iter()
            .zip(&u2)
            .map(|(a, v)| a + k * v)
            .collect();
        let load_work = 2.0 * k * dot(&load_red, &u2);
        let out = StepOutput {
            n,
            u1: self.reduced.constraints.extend(&u1),
            u2: self.reduced.constraints.extend(&u2),
            load_work,
            residual,
        };
        self.u1.push(u1);
        self.u2 = u2;
        self.n = n;
        Ok(out)
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return 0.0;
    }
    let ax = a.mul_vec(x);
    let r: f64 = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum();
    r.sqrt() / bnorm
}

/// March over the whole grid from `(u0, v0)`.
pub fn run(
    sys: &AssembledSystem,
    grid: &TimeGrid,
    weights: &WeightTable,
    u0: &[f64],
    v0: &[f64],
    opts: StepperOptions,
) -> Result<SolutionHistory> {
    let probes = opts.probes.clone();
    let mut stepper = Stepper::new(sys, grid, weights, u0, v0, opts)?;
    let n_steps = grid.len();
    let mut u1 = Vec::with_capacity(n_steps + 1);
    let mut u2 = Vec::with_capacity(n_steps + 1);
    u1.push(u0.to_vec());
    u2.push(v0.to_vec());
    let mut load_work = Vec::with_capacity(n_steps);
    let mut residuals = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let out = stepper.advance()?;
        u1.push(out.u1);
        u2.push(out.u2);
        load_work.push(out.load_work);
        residuals.push(out.residual);
    }
    let probes = probes
        .into_iter()
        .map(|v| ProbeTrace {
            vertex: v,
            point: sys.mesh.vertices[v],
            u1: u1.iter().map(|u| [u[2 * v], u[2 * v + 1]]).collect(),
            u2: u2.iter().map(|u| [u[2 * v], u[2 * v + 1]]).collect(),
        })
        .collect();
    Ok(SolutionHistory {
        grid: grid.clone(),
        u1,
        u2,
        load_work,
        residuals,
        probes,
    })
}
