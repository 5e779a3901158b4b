//! Triangulated reference configuration with a Dirichlet/Neumann boundary split.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Triangles with area below this are rejected.
pub const AREA_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub kind: BoundaryKind,
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    boundary_edges: Vec<BoundaryEdge>,
    dirichlet_nodes: Vec<usize>,
    is_dirichlet: Vec<bool>,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl Mesh {
    /// Assemble a mesh from raw parts, checking every invariant.
    ///
    /// Triangles must be counter-clockwise with area above [`AREA_TOL`]; the
    /// boundary edges must be exactly the edges owned by a single triangle.
    /// Dirichlet nodes are the endpoints of Dirichlet-tagged edges.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        let mut areas = Vec::with_capacity(triangles.len());
        for (e, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::NodeIndex { element: e, node: bad });
            }
            let a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a <= AREA_TOL {
                return Err(MeshError::DegenerateTriangle { element: e, area: a });
            }
            areas.push(a);
        }

        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let topological: BTreeSet<(usize, usize)> = edge_count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(k, _)| k)
            .collect();
        let mut tagged = BTreeSet::new();
        for be in &boundary_edges {
            let [a, b] = be.nodes;
            let key = (a.min(b), a.max(b));
            if !topological.contains(&key) {
                return Err(MeshError::NotABoundaryEdge { a, b });
            }
            if !tagged.insert(key) {
                return Err(MeshError::DuplicateBoundaryEdge { a, b });
            }
        }
        if tagged.len() != topological.len() {
            return Err(MeshError::UntaggedBoundary {
                missing: topological.len() - tagged.len(),
            });
        }

        let mut is_dirichlet = vec![false; n];
        for be in boundary_edges.iter().filter(|e| e.kind == BoundaryKind::Dirichlet) {
            for &i in &be.nodes {
                is_dirichlet[i] = true;
            }
        }
        let dirichlet_nodes: Vec<usize> = (0..n).filter(|&i| is_dirichlet[i]).collect();
        if dirichlet_nodes.is_empty() {
            return Err(MeshError::NoDirichletBoundary);
        }

        Ok(Self {
            nodes,
            triangles,
            areas,
            boundary_edges,
            dirichlet_nodes,
            is_dirichlet,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.is_dirichlet[node]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Element centroid.
    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let t = self.triangles[e];
        let mut c = [0.0; 2];
        for &i in &t {
            c[0] += self.nodes[i][0] / 3.0;
            c[1] += self.nodes[i][1] / 3.0;
        }
        c
    }
}

/// Structured `nx × ny` grid of `domain`, each cell split along its
/// lower-left/upper-right diagonal into two right triangles.
pub fn build_structured_mesh(nx: usize, ny: usize, domain: Rect, dirichlet_sides: &[Side]) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::ZeroCells { nx, ny });
    }
    if dirichlet_sides.is_empty() {
        return Err(MeshError::NoDirichletSides);
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
        return Err(MeshError::EmptyDomain);
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let hx = (domain.x1 - domain.x0) / nx as f64;
    let hy = (domain.y1 - domain.y0) / ny as f64;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            nodes.push([x, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }

    let kind = |s: Side| {
        if dirichlet_sides.contains(&s) {
            BoundaryKind::Dirichlet
        } else {
            BoundaryKind::Neumann
        }
    };
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i, 0), id(i + 1, 0)],
            kind: kind(Side::Bottom),
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i + 1, ny), id(i, ny)],
            kind: kind(Side::Top),
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(nx, j), id(nx, j + 1)],
            kind: kind(Side::Right),
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [id(0, j + 1), id(0, j)],
            kind: kind(Side::Left),
        });
    }

    Mesh::from_parts(nodes, triangles, boundary_edges)
}
