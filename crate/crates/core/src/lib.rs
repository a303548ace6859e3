//! Discontinuous Galerkin (piecewise-constant in time) solver for dynamic
//! fractional-order viscoelasticity.
//!
//! The material law carries a weakly singular memory kernel
//! `β(t) = -γ d/dt E_α(-(t/τ)^α)` built from the Mittag-Leffler function.
//! Space is discretized with continuous P1 triangles on a rectangle, time with
//! dG(0). The crate is organized by concern:
//!
//! * [`mlf`]: Mittag-Leffler evaluation and the kernel primitives `β`, `B`, `C`, `η`.
//! * [`weights`]: time grids and the convolution weight table `ω_nj`, `η_n`.
//! * [`fem`]: structured meshes, elasticity/mass assembly, Dirichlet elimination, linear solvers.
//! * [`stepper`]: the fully discrete time-marching scheme.
//! * [`diagnostics`]: the discrete energy identity and long-time limits.
//! * [`scalar`]: a single-mode model with an independent reference solver and convergence studies.
//! * [`convergence`]: observed orders and the finite element self-convergence study.
//! * [`config`]: the `key = value` run configuration format.
//! * [`output`]: CSV writers.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod mlf;
pub mod output;
pub mod scalar;
pub mod stepper;
pub mod weights;

pub use error::{Error, Result};
pub use mlf::KernelParams;
pub use weights::{TimeGrid, WeightMode, WeightTable};
