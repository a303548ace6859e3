use std::collections::HashMap;
use std::fmt;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// Side of the rectangle an edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        Side::ALL.into_iter().find(|side| side.name() == s)
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

/// Uniform `nx × ny` grid on `[0, lx] × [0, ly]`, each cell split along its
/// lower-left to upper-right diagonal. Edges on `x = 0` are Dirichlet.
pub fn build_rect_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return domain(format!("mesh needs nx, ny >= 1 (got {nx}, {ny})"));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return domain(format!("mesh extents must be positive (got {lx}, {ly})"));
    }
    let id = |i: usize, j: usize| i + j * (nx + 1);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let neumann = |a, b, side| BoundaryEdge {
        vertices: [a, b],
        tag: BoundaryTag::Neumann,
        side,
    };
    for i in 0..nx {
        boundary_edges.push(neumann(id(i, 0), id(i + 1, 0), Side::Bottom));
        boundary_edges.push(neumann(id(i + 1, ny), id(i, ny), Side::Top));
    }
    for j in 0..ny {
        boundary_edges.push(neumann(id(nx, j), id(nx, j + 1), Side::Right));
        boundary_edges.push(BoundaryEdge {
            vertices: [id(0, j + 1), id(0, j)],
            tag: BoundaryTag::Dirichlet,
            side: Side::Left,
        });
    }
    let mesh = Mesh {
        vertices,
        triangles,
        boundary_edges,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.vertices.len()
    }

    /// Signed area of triangle `t`.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    /// Longest edge over all triangles.
    pub fn h(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| self.edge_length(a, b))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let area = self.area(t);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {t} has nonpositive signed area {area}"
                )));
            }
            for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                *edge_count.entry(edge_key(a, b)).or_default() += 1;
            }
        }
        let mut tagged: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for e in &self.boundary_edges {
            let key = edge_key(e.vertices[0], e.vertices[1]);
            if edge_count.get(&key) != Some(&1) {
                return Err(Error::Mesh(format!(
                    "boundary edge {:?} does not belong to exactly one triangle",
                    e.vertices
                )));
            }
            if let Some(prev) = tagged.insert(key, e.tag) {
                let msg = if prev == e.tag {
                    format!("boundary edge {:?} listed twice", e.vertices)
                } else {
                    format!(
                        "boundary edge {:?} is both Dirichlet and Neumann",
                        e.vertices
                    )
                };
                return Err(Error::Mesh(msg));
            }
        }
        if let Some((key, _)) = edge_count
            .iter()
            .find(|(k, &c)| c == 1 && !tagged.contains_key(*k))
        {
            return Err(Error::Mesh(format!("boundary edge {key:?} carries no tag")));
        }
        Ok(())
    }

    /// Vertices on Dirichlet edges, ascending.
    pub fn dirichlet_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Nearest vertex and its distance.
    pub fn nearest_vertex(&self, p: [f64; 2]) -> (usize, f64) {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, (v[0] - p[0]).hypot(v[1] - p[1])))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
    }
}
