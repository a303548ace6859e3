//! P1 vector finite elements for plane elasticity on a structured rectangle.

pub mod assembly;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use assembly::{
    apply_dirichlet, assemble, assemble_with, element_stiffness, quasi_static_solve, traction_load,
    volume_load, AssembledSystem, Constraints, ElasticParams, Loads, MassKind, ReducedSystem,
};
pub use mesh::{build_rect_mesh, BoundaryEdge, BoundaryTag, Mesh, Side};
pub use solver::{pcg, CgStats, LinearSolver, SkylineCholesky, SolverKind};
pub use sparse::CsrMatrix;
