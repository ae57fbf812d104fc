//! Conforming triangulations with full edge topology, structured generators,
//! seeded perturbation, subdomain partitions and a plain-text format.

mod generate;
mod io;
mod partition;

use std::collections::HashMap;

pub use generate::{generate_structured, perturb_quasi_uniform, MAX_PERTURBATION};
pub use io::{read_mesh, write_mesh};
pub use partition::{partition_mesh, Partition, PartitionStrategy};

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// `(0,1)² \ [0.5,1)×(0,0.5]`, re-entrant corner at `(0.5, 0.5)`.
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 0.75,
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-square" | "square" => Ok(Domain::UnitSquare),
            "l-shape" | "lshape" => Ok(Domain::LShape),
            other => invalid(format!("unknown domain '{other}'")),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::UnitSquare => "unit-square",
            Domain::LShape => "l-shape",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

/// One incidence of an edge: the triangle and the local edge index in it.
/// Local edge `k` is the one opposite local vertex `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub triangle: usize,
    pub local: usize,
}

/// Counterclockwise triangles with derived edges. Edges are stored as sorted
/// vertex pairs; for an interior edge the first side is the triangle with the
/// smaller index.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_sides: Vec<(EdgeSide, Option<EdgeSide>)>,
    triangle_edges: Vec<[usize; 3]>,
    edge_len: Vec<f64>,
    h_max: f64,
}

impl TriangleMesh {
    /// Builds the edge topology. Rejects clockwise or degenerate triangles and
    /// non-manifold edges.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return invalid(format!("triangle {t} references a missing vertex"));
            }
            let a = signed_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if a <= 0.0 {
                return invalid(format!(
                    "triangle {t} is not counterclockwise (signed area {a:e})"
                ));
            }
        }

        let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * triangles.len());
        let mut edges = Vec::new();
        let mut sides: Vec<(EdgeSide, Option<EdgeSide>)> = Vec::new();
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = if a < b { [a, b] } else { [b, a] };
                let side = EdgeSide { triangle: t, local: k };
                let e = match index.get(&key) {
                    Some(&e) => {
                        if sides[e].1.is_some() {
                            return invalid(format!(
                                "edge ({}, {}) has more than two incident triangles",
                                key[0], key[1]
                            ));
                        }
                        sides[e].1 = Some(side);
                        e
                    }
                    None => {
                        let e = edges.len();
                        index.insert(key, e);
                        edges.push(key);
                        sides.push((side, None));
                        e
                    }
                };
                triangle_edges[t][k] = e;
            }
        }

        let edge_len: Vec<f64> = edges
            .iter()
            .map(|&[a, b]| dist(&vertices[a], &vertices[b]))
            .collect();
        let h_max = triangle_edges
            .iter()
            .flat_map(|te| te.iter().map(|&e| edge_len[e]))
            .fold(0.0, f64::max);

        Ok(Self {
            vertices,
            triangles,
            edges,
            edge_sides: sides,
            triangle_edges,
            edge_len,
            h_max,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Global edge index of local edge `k` of triangle `t`.
    pub fn triangle_edge(&self, t: usize, k: usize) -> usize {
        self.triangle_edges[t][k]
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_sides(&self, e: usize) -> (EdgeSide, Option<EdgeSide>) {
        self.edge_sides[e]
    }

    pub fn edge_kind(&self, e: usize) -> EdgeKind {
        if self.edge_sides[e].1.is_some() {
            EdgeKind::Interior
        } else {
            EdgeKind::Boundary
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_kind(e) == EdgeKind::Boundary
    }

    /// Length `h_e` of edge `e`.
    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_len[e]
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_len
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }

    /// Largest element diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// `max h_e / min h_e`.
    pub fn quasi_uniformity(&self) -> f64 {
        let min = self.edge_len.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.edge_len.iter().copied().fold(0.0, f64::max);
        max / min
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(&a, &b, &c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        self.triangle_edges[t]
            .iter()
            .map(|&e| self.edge_len[e])
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Unit outward normal of local edge `k` of triangle `t`.
    pub fn outward_normal(&self, t: usize, k: usize) -> Point {
        let tri = self.triangles[t];
        let a = self.vertices[tri[(k + 1) % 3]];
        let b = self.vertices[tri[(k + 2) % 3]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    /// Flags for vertices lying on a boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_vertices()];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.is_boundary_edge(e) {
                flags[a] = true;
                flags[b] = true;
            }
        }
        flags
    }

    /// Diameter of the vertex set (exact, via the convex hull).
    pub fn domain_diameter(&self) -> f64 {
        point_set_diameter(self.vertices.clone())
    }
}

pub(crate) fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Largest pairwise distance, computed over the convex hull.
pub(crate) fn point_set_diameter(mut pts: Vec<Point>) -> f64 {
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    pts.dedup();
    if pts.len() < 3 {
        return match pts.len() {
            2 => dist(&pts[0], &pts[1]),
            _ => 0.0,
        };
    }
    let cross = |o: &Point, a: &Point, b: &Point| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let mut d = 0.0_f64;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            d = d.max(dist(&hull[i], &hull[j]));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_clockwise_triangle() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        assert!(TriangleMesh::new(v, vec![[0, 2, 1]]).is_err());
    }

    #[test]
    fn single_triangle_topology() {
        let m = TriangleMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]])
            .unwrap();
        assert_eq!(m.n_edges(), 3);
        assert!((0..3).all(|e| m.is_boundary_edge(e)));
        // local edge 0 is the hypotenuse, normal (1,1)/sqrt2
        let n = m.outward_normal(0, 0);
        assert!((n[0] - 0.5_f64.sqrt()).abs() < 1e-15 && (n[1] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((m.h_max() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hull_diameter() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 1.0]];
        assert!((point_set_diameter(pts) - 2f64.sqrt()).abs() < 1e-15);
    }
}
