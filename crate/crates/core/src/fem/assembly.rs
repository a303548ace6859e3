use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::mesh::{BoundaryTag, Mesh, Side};
use super::solver::{LinearSolver, SolverKind};
use super::sparse::CsrMatrix;
use crate::error::{domain, Error, Result};

/// Lamé constants `mu`, `lambda` (Pa) and density `rho` (kg/m³).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    pub mu: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl ElasticParams {
    pub fn new(mu: f64, lambda: f64, rho: f64) -> Result<Self> {
        let p = Self { mu, lambda, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive and finite (got {v})"));
            }
        }
        Ok(())
    }

    /// Plane-strain constitutive matrix in Voigt order `(xx, yy, xy)` with engineering shear.
    pub fn voigt(&self) -> [[f64; 3]; 3] {
        let (mu, la) = (self.mu, self.lambda);
        [
            [la + 2.0 * mu, la, 0.0],
            [la, la + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

impl FromStr for MassKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(Self::Consistent),
            "lumped" => Ok(Self::Lumped),
            _ => domain(format!(
                "unknown mass kind '{s}' (expected consistent or lumped)"
            )),
        }
    }
}

impl fmt::Display for MassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::Lumped => "lumped",
        })
    }
}

pub type VolumeFn = Arc<dyn Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync>;
pub type TractionFn = Arc<dyn Fn(f64, [f64; 2], Side) -> [f64; 2] + Send + Sync>;

/// Volume force density `f(t, x)` and boundary traction `g(t, x, side)`; absent means zero.
#[derive(Clone, Default)]
pub struct Loads {
    pub volume: Option<VolumeFn>,
    pub traction: Option<TractionFn>,
}

impl fmt::Debug for Loads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Loads")
            .field("volume", &self.volume.is_some())
            .field("traction", &self.traction.is_some())
            .finish()
    }
}

impl Loads {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_volume(
        mut self,
        f: impl Fn(f64, [f64; 2]) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.volume = Some(Arc::new(f));
        self
    }

    pub fn with_traction(
        mut self,
        g: impl Fn(f64, [f64; 2], Side) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        self.traction = Some(Arc::new(g));
        self
    }

    /// Time- and space-constant data: a body force and a traction per side.
    pub fn constant(volume: [f64; 2], traction: &[(Side, [f64; 2])]) -> Self {
        let mut loads = Self::none();
        if volume != [0.0, 0.0] {
            loads = loads.with_volume(move |_, _| volume);
        }
        let table: Vec<(Side, [f64; 2])> = traction
            .iter()
            .copied()
            .filter(|(_, g)| *g != [0.0, 0.0])
            .collect();
        if !table.is_empty() {
            loads = loads.with_traction(move |_, _, side| {
                table
                    .iter()
                    .find(|(s, _)| *s == side)
                    .map_or([0.0, 0.0], |(_, g)| *g)
            });
        }
        loads
    }

    pub fn is_zero(&self) -> bool {
        self.volume.is_none() && self.traction.is_none()
    }
}

/// Nodal load of a volume force; vertex quadrature, exact for piecewise constant `f`.
pub fn volume_load(mesh: &Mesh, f: &dyn Fn(f64, [f64; 2]) -> [f64; 2], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_dofs()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let w = mesh.area(e) / 3.0;
        for &v in tri {
            let fv = f(t, mesh.vertices[v]);
            out[2 * v] += w * fv[0];
            out[2 * v + 1] += w * fv[1];
        }
    }
    out
}

/// Nodal load of a traction on the Neumann edges; two-point trapezoid per edge.
pub fn traction_load(mesh: &Mesh, g: &dyn Fn(f64, [f64; 2], Side) -> [f64; 2], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_dofs()];
    for edge in mesh
        .boundary_edges
        .iter()
        .filter(|e| e.tag == BoundaryTag::Neumann)
    {
        let [a, b] = edge.vertices;
        let half = 0.5 * mesh.edge_length(a, b);
        for v in [a, b] {
            let gv = g(t, mesh.vertices[v], edge.side);
            out[2 * v] += half * gv[0];
            out[2 * v + 1] += half * gv[1];
        }
    }
    out
}

/// Gradients of the three barycentric functions and the area.
fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / det, (p[k][0] - p[j][0]) / det];
    }
    (g, 0.5 * det)
}

/// 6×6 element stiffness for local dofs `(x0, y0, x1, y1, x2, y2)`.
pub fn element_stiffness(p: [[f64; 2]; 3], params: &ElasticParams) -> [[f64; 6]; 6] {
    let (g, area) = p1_gradients(p);
    let mut b = [[0.0; 6]; 3];
    for i in 0..3 {
        b[0][2 * i] = g[i][0];
        b[1][2 * i + 1] = g[i][1];
        b[2][2 * i] = g[i][1];
        b[2][2 * i + 1] = g[i][0];
    }
    let d = params.voigt();
    let mut db = [[0.0; 6]; 3];
    for r in 0..3 {
        for c in 0..6 {
            db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
        }
    }
    let mut ke = [[0.0; 6]; 6];
    for r in 0..6 {
        for c in 0..6 {
            ke[r][c] = area * (0..3).map(|s| b[s][r] * db[s][c]).sum::<f64>();
        }
    }
    ke
}

/// Mesh, matrices, loads and the Dirichlet dof set. Matrices are unconstrained.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub mesh: Mesh,
    pub params: ElasticParams,
    pub mass_kind: MassKind,
    pub stiffness: CsrMatrix,
    /// Density-weighted.
    pub mass: CsrMatrix,
    pub loads: Loads,
    constrained_dofs: Vec<usize>,
}

pub fn assemble(mesh: &Mesh, params: ElasticParams) -> Result<AssembledSystem> {
    assemble_with(mesh, params, MassKind::Consistent, Loads::none())
}

pub fn assemble_with(
    mesh: &Mesh,
    params: ElasticParams,
    mass_kind: MassKind,
    loads: Loads,
) -> Result<AssembledSystem> {
    mesh.validate()?;
    params.validate()?;
    let n = mesh.n_dofs();
    let mut kt = Vec::with_capacity(36 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(18 * mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        let ke = element_stiffness(p, &params);
        let dofs = [
            2 * tri[0],
            2 * tri[0] + 1,
            2 * tri[1],
            2 * tri[1] + 1,
            2 * tri[2],
            2 * tri[2] + 1,
        ];
        for r in 0..6 {
            for c in 0..6 {
                kt.push((dofs[r], dofs[c], ke[r][c]));
            }
        }
        let scale = params.rho * mesh.area(e);
        for a in 0..3 {
            for comp in 0..2 {
                match mass_kind {
                    MassKind::Consistent => {
                        for b in 0..3 {
                            let w = if a == b { scale / 6.0 } else { scale / 12.0 };
                            mt.push((2 * tri[a] + comp, 2 * tri[b] + comp, w));
                        }
                    }
                    MassKind::Lumped => {
                        mt.push((2 * tri[a] + comp, 2 * tri[a] + comp, scale / 3.0))
                    }
                }
            }
        }
    }
    let constrained_dofs = mesh
        .dirichlet_vertices()
        .into_iter()
        .flat_map(|v| [2 * v, 2 * v + 1])
        .collect();
    Ok(AssembledSystem {
        mesh: mesh.clone(),
        params,
        mass_kind,
        stiffness: CsrMatrix::from_triplets(n, kt),
        mass: CsrMatrix::from_triplets(n, mt),
        loads,
        constrained_dofs,
    })
}

impl AssembledSystem {
    pub fn n_dofs(&self) -> usize {
        self.stiffness.n()
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained_dofs
    }

    /// Replace the constrained set, e.g. to pin extra dofs.
    pub fn set_constrained_dofs(&mut self, mut dofs: Vec<usize>) -> Result<()> {
        dofs.sort_unstable();
        dofs.dedup();
        if let Some(&d) = dofs.iter().find(|&&d| d >= self.n_dofs()) {
            return domain(format!("constrained dof {d} out of range"));
        }
        self.constrained_dofs = dofs;
        Ok(())
    }

    pub fn volume_load(&self, t: f64) -> Vec<f64> {
        match &self.loads.volume {
            Some(f) => volume_load(&self.mesh, f.as_ref(), t),
            None => vec![0.0; self.n_dofs()],
        }
    }

    pub fn traction_load(&self, t: f64) -> Vec<f64> {
        match &self.loads.traction {
            Some(g) => traction_load(&self.mesh, g.as_ref(), t),
            None => vec![0.0; self.n_dofs()],
        }
    }

    /// `F(t) + G(t)`
    pub fn total_load(&self, t: f64) -> Vec<f64> {
        let mut f = self.volume_load(t);
        for (a, b) in f.iter_mut().zip(self.traction_load(t)) {
            *a += b;
        }
        f
    }

    /// Dof index of `component` (0 = x, 1 = y) at vertex `v`.
    pub fn dof(v: usize, component: usize) -> usize {
        2 * v + component
    }
}

/// Free-dof numbering after eliminating the constrained set.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    n_total: usize,
    free: Vec<usize>,
    map: Vec<Option<usize>>,
}

impl Constraints {
    pub fn new(n_total: usize, constrained: &[usize]) -> Result<Self> {
        if constrained.is_empty() {
            return Err(Error::NoConstraints);
        }
        let mut fixed = vec![false; n_total];
        for &d in constrained {
            if d >= n_total {
                return domain(format!("constrained dof {d} out of range"));
            }
            fixed[d] = true;
        }
        let free: Vec<usize> = (0..n_total).filter(|&d| !fixed[d]).collect();
        let mut map = vec![None; n_total];
        for (i, &d) in free.iter().enumerate() {
            map[d] = Some(i);
        }
        Ok(Self { n_total, free, map })
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Reduced index of a full dof, `None` if constrained.
    pub fn reduced_index(&self, dof: usize) -> Option<usize> {
        self.map[dof]
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_total);
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Full vector with exact zeros on constrained dofs.
    pub fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.free.len());
        let mut full = vec![0.0; self.n_total];
        for (&d, &v) in self.free.iter().zip(reduced) {
            full[d] = v;
        }
        full
    }

    pub fn reduce(&self, a: &CsrMatrix) -> CsrMatrix {
        a.submatrix(&self.free, &self.map)
    }

    /// Largest absolute value on constrained dofs.
    pub fn violation(&self, full: &[f64]) -> f64 {
        full.iter()
            .enumerate()
            .filter(|(d, _)| self.map[*d].is_none())
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// Stiffness and mass with constrained rows and columns removed.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub constraints: Constraints,
}

pub fn apply_dirichlet(sys: &AssembledSystem) -> Result<ReducedSystem> {
    let constraints = Constraints::new(sys.n_dofs(), sys.constrained_dofs())?;
    Ok(ReducedSystem {
        stiffness: constraints.reduce(&sys.stiffness),
        mass: constraints.reduce(&sys.mass),
        constraints,
    })
}

/// Solve `scale · K u = F(t) + G(t)` on the free dofs.
pub fn quasi_static_solve(
    sys: &AssembledSystem,
    scale: f64,
    t: f64,
    solver: SolverKind,
) -> Result<Vec<f64>> {
    if !(scale > 0.0 && scale.is_finite()) {
        return domain(format!("quasi-static scale must be positive (got {scale})"));
    }
    let reduced = apply_dirichlet(sys)?;
    let rhs = reduced.constraints.restrict(&sys.total_load(t));
    let matrix = reduced.stiffness.scaled(scale);
    let x = LinearSolver::new(matrix, solver)?.solve(&rhs, None, 1e-12)?;
    Ok(reduced.constraints.extend(&x))
}
