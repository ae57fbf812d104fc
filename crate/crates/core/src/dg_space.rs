//! Broken P1 spaces, interface trace spaces, quadrature, jump/average
//! operators and the energy and interface norms.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::mesh::{EdgeSide, Partition, Point, TriangleMesh};

/// Points and weights on a reference cell: the triangle `{ξ, η ≥ 0, ξ+η ≤ 1}`
/// for `D = 2`, the interval `[0, 1]` for `D = 1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule<2> {
    /// Edge-midpoint rule, exact for degree 2.
    pub fn triangle_degree2() -> Self {
        Self {
            points: vec![[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        }
    }

    /// 7-point rule exact for degree 5, used for error norms of smooth data.
    pub fn triangle_degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 2400.0;
        let w2 = (155.0 + s15) / 2400.0;
        Self {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0],
                [a1, a1],
                [b1, a1],
                [a1, b1],
                [a2, a2],
                [b2, a2],
                [a2, b2],
            ],
            weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
            degree: 5,
        }
    }
}

impl QuadratureRule<1> {
    /// Two-point Gauss-Legendre on `[0, 1]`, exact for degree 3.
    pub fn gauss2() -> Self {
        let d = 0.5 / 3f64.sqrt();
        Self {
            points: vec![[0.5 - d], [0.5 + d]],
            weights: vec![0.5, 0.5],
            degree: 3,
        }
    }
}

/// Affine P1 element: nodal basis = barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// Constant gradients of the three nodal basis functions.
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [p0, p1, p2] = points;
        let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        let mut grads = [[0.0; 2]; 3];
        for (k, g) in grads.iter_mut().enumerate() {
            let a = points[(k + 1) % 3];
            let b = points[(k + 2) % 3];
            *g = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
        }
        Self { points, area, grads }
    }

    /// Physical point of reference coordinates `(ξ, η)`.
    pub fn map(&self, r: [f64; 2]) -> Point {
        let l = [1.0 - r[0] - r[1], r[0], r[1]];
        let [p0, p1, p2] = self.points;
        [
            l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
            l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
        ]
    }

    /// Basis values at reference coordinates `(ξ, η)`.
    pub fn basis(r: [f64; 2]) -> [f64; 3] {
        [1.0 - r[0] - r[1], r[0], r[1]]
    }

    pub fn gradient(&self, c: [f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += c[k] * self.grads[k][0];
            g[1] += c[k] * self.grads[k][1];
        }
        g
    }
}

/// Local vertex indices, within `side.triangle`, of the two endpoints of edge
/// `e` in canonical (sorted vertex) order.
pub fn side_endpoints(mesh: &TriangleMesh, e: usize, side: EdgeSide) -> [usize; 2] {
    let tri = mesh.triangle(side.triangle);
    let (la, lb) = ((side.local + 1) % 3, (side.local + 2) % 3);
    if tri[la] == mesh.edge(e)[0] {
        [la, lb]
    } else {
        [lb, la]
    }
}

/// Piecewise linear functions without inter-element continuity. DOF
/// `3t + k` is the nodal value at local vertex `k` of triangle `t`.
#[derive(Debug, Clone)]
pub struct BrokenP1Space {
    mesh: Arc<TriangleMesh>,
}

impl BrokenP1Space {
    /// Only `k = 1` is supported.
    pub fn new(mesh: Arc<TriangleMesh>, k: usize) -> Result<Self> {
        if k != 1 {
            return invalid(format!("only polynomial degree 1 is supported, got {k}"));
        }
        Ok(Self { mesh })
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.mesh.n_triangles()
    }

    #[inline]
    pub fn dof(&self, t: usize, k: usize) -> usize {
        3 * t + k
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.triangle_points(t))
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_dofs() {
            return invalid(format!(
                "coefficient vector has length {}, space has {} dofs",
                u.len(),
                self.n_dofs()
            ));
        }
        Ok(())
    }

    pub fn element_coeffs(&self, u: &[f64], t: usize) -> [f64; 3] {
        [u[3 * t], u[3 * t + 1], u[3 * t + 2]]
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh
            .triangles()
            .iter()
            .flat_map(|tri| tri.map(|v| f(self.mesh.vertex(v))))
            .collect()
    }

    /// Values of the trace from `side` at the canonical endpoints of `e`.
    pub fn edge_trace(&self, u: &[f64], e: usize, side: EdgeSide) -> [f64; 2] {
        let [a, b] = side_endpoints(&self.mesh, e, side);
        [u[3 * side.triangle + a], u[3 * side.triangle + b]]
    }

    /// `‖u‖²_K`, exact for P1 (`|K|/12 (Σc² + (Σc)²)`).
    pub fn element_l2_norm_sq(&self, u: &[f64], t: usize) -> f64 {
        let c = self.element_coeffs(u, t);
        let s = c[0] + c[1] + c[2];
        self.mesh.area(t) / 12.0 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + s * s)
    }

    /// `‖∇u‖²_K`
    pub fn element_grad_norm_sq(&self, u: &[f64], t: usize) -> f64 {
        let g = self.geometry(t);
        let gr = g.gradient(self.element_coeffs(u, t));
        g.area * (gr[0] * gr[0] + gr[1] * gr[1])
    }

    /// `‖u‖²_{∂K}`
    pub fn element_boundary_norm_sq(&self, u: &[f64], t: usize) -> f64 {
        let c = self.element_coeffs(u, t);
        (0..3)
            .map(|k| {
                let e = self.mesh.triangle_edge(t, k);
                edge_mass(self.mesh.edge_length(e), c[(k + 1) % 3], c[(k + 2) % 3])
            })
            .sum()
    }

    pub fn l2_norm_sq(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        Ok((0..self.mesh.n_triangles()).map(|t| self.element_l2_norm_sq(u, t)).sum())
    }

    /// `‖·‖_*` includes `h²|u|²_{2}`, which vanishes for P1, so it coincides
    /// with the L2 norm.
    pub fn star_norm_sq(&self, u: &[f64]) -> Result<f64> {
        self.l2_norm_sq(u)
    }

    pub fn grad_norm_sq(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        Ok((0..self.mesh.n_triangles()).map(|t| self.element_grad_norm_sq(u, t)).sum())
    }

    /// `‖u - g‖²_0` with the degree-5 rule.
    pub fn l2_error_sq(&self, u: &[f64], g: impl Fn(Point) -> f64) -> Result<f64> {
        self.check_len(u)?;
        let q = QuadratureRule::triangle_degree5();
        let mut s = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let geo = self.geometry(t);
            let c = self.element_coeffs(u, t);
            for (r, w) in q.points.iter().zip(&q.weights) {
                let b = ElementGeometry::basis(*r);
                let uh = b[0] * c[0] + b[1] * c[1] + b[2] * c[2];
                let d = uh - g(geo.map(*r));
                s += 2.0 * geo.area * w * d * d;
            }
        }
        Ok(s)
    }

    /// `|||u|||² = η‖u‖² + ‖∇u‖² + Σ_e μ_e ‖⟦u⟧‖²_e` over all edges,
    /// boundary edges included.
    pub fn dg_norm_sq(&self, u: &[f64], eta: f64, mu: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        if mu.len() != self.mesh.n_edges() {
            return invalid(format!(
                "penalty has {} entries for {} edges",
                mu.len(),
                self.mesh.n_edges()
            ));
        }
        let mut s = eta * self.l2_norm_sq(u)? + self.grad_norm_sq(u)?;
        for (e, &mu_e) in mu.iter().enumerate() {
            let (a, b) = self.mesh.edge_sides(e);
            let ja = self.edge_trace(u, e, a);
            let jump = match b {
                Some(b) => {
                    let jb = self.edge_trace(u, e, b);
                    [ja[0] - jb[0], ja[1] - jb[1]]
                }
                None => ja,
            };
            s += mu_e * edge_mass(self.mesh.edge_length(e), jump[0], jump[1]);
        }
        Ok(s)
    }
}

/// `∫_e q²` for the linear `q` with endpoint values `a`, `b` on an edge of
/// length `h`.
#[inline]
pub fn edge_mass(h: f64, a: f64, b: f64) -> f64 {
    h / 3.0 * (a * a + a * b + b * b)
}

/// Jump and average of a P1 trace on one edge, as values at the canonical
/// endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpAverage {
    /// `⟦q⟧ = q₁n₁ + q₂n₂` (or `q n` on the boundary), per endpoint.
    pub jump: [[f64; 2]; 2],
    /// `{q} = (q₁ + q₂)/2` (or `q` on the boundary), per endpoint.
    pub average: [f64; 2],
}

/// Jump and average on edge `e`. `left` and `right` pair an incidence with
/// the trace values at the canonical endpoints; `right` is `None` on the
/// boundary.
pub fn jump_average_on_edge(
    mesh: &TriangleMesh,
    e: usize,
    left: (EdgeSide, [f64; 2]),
    right: Option<(EdgeSide, [f64; 2])>,
) -> JumpAverage {
    let nl = mesh.outward_normal(left.0.triangle, left.0.local);
    let ql = left.1;
    match right {
        None => JumpAverage {
            jump: [[ql[0] * nl[0], ql[0] * nl[1]], [ql[1] * nl[0], ql[1] * nl[1]]],
            average: ql,
        },
        Some((rs, qr)) => {
            debug_assert!(mesh.triangle_edge(rs.triangle, rs.local) == e);
            let nr = mesh.outward_normal(rs.triangle, rs.local);
            let j = |p: usize| [ql[p] * nl[0] + qr[p] * nr[0], ql[p] * nl[1] + qr[p] * nr[1]];
            JumpAverage {
                jump: [j(0), j(1)],
                average: [0.5 * (ql[0] + qr[0]), 0.5 * (ql[1] + qr[1])],
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLayout {
    /// One set of DOFs on `Γ`, shared by both sides.
    SingleCopy,
    /// One copy `λ_i` per subdomain on `∂Ω_i ∩ Γ`, concatenated by subdomain.
    PerSubdomain,
}

/// P1 functions on each interface edge, discontinuous at edge endpoints.
/// Every edge carries two DOFs in canonical vertex order.
///
/// Locally, subdomain `s` numbers its interface edges in increasing global
/// order, so edge `partition.interface_edges(s)[k]` owns local DOFs `2k` and
/// `2k + 1`.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    partition: Arc<Partition>,
    layout: TraceLayout,
    /// position of each interface edge in `partition.gamma()`
    gamma_pos: Vec<usize>,
    offsets: Vec<usize>,
}

impl TraceSpace {
    pub fn new(partition: Arc<Partition>, layout: TraceLayout) -> Self {
        let mut gamma_pos = vec![usize::MAX; partition.mesh().n_edges()];
        for (k, &e) in partition.gamma().iter().enumerate() {
            gamma_pos[e] = k;
        }
        let mut offsets = vec![0];
        for s in 0..partition.n_subdomains() {
            offsets.push(offsets[s] + 2 * partition.interface_edges(s).len());
        }
        Self {
            partition,
            layout,
            gamma_pos,
            offsets,
        }
    }

    pub fn single_copy(partition: Arc<Partition>) -> Self {
        Self::new(partition, TraceLayout::SingleCopy)
    }

    pub fn per_subdomain(partition: Arc<Partition>) -> Self {
        Self::new(partition, TraceLayout::PerSubdomain)
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn layout(&self) -> TraceLayout {
        self.layout
    }

    pub fn n_dofs(&self) -> usize {
        match self.layout {
            TraceLayout::SingleCopy => 2 * self.partition.gamma().len(),
            TraceLayout::PerSubdomain => *self.offsets.last().unwrap(),
        }
    }

    /// Number of local trace DOFs of subdomain `s`.
    pub fn n_local(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }

    /// Local DOFs of interface edge `e` in subdomain `s`.
    pub fn local_edge_dofs(&self, s: usize, e: usize) -> Option<[usize; 2]> {
        self.partition
            .interface_edges(s)
            .binary_search(&e)
            .ok()
            .map(|k| [2 * k, 2 * k + 1])
    }

    /// Global DOFs of edge `e` in single-copy numbering.
    pub fn shared_edge_dofs(&self, e: usize) -> Option<[usize; 2]> {
        let k = *self.gamma_pos.get(e)?;
        (k != usize::MAX).then_some([2 * k, 2 * k + 1])
    }

    /// Maps local DOF `d` of subdomain `s` into this space's global numbering.
    pub fn global_dof(&self, s: usize, d: usize) -> usize {
        match self.layout {
            TraceLayout::PerSubdomain => self.offsets[s] + d,
            TraceLayout::SingleCopy => {
                let e = self.partition.interface_edges(s)[d / 2];
                2 * self.gamma_pos[e] + d % 2
            }
        }
    }

    /// Start of the block of subdomain `s` in per-subdomain numbering.
    pub fn offset(&self, s: usize) -> usize {
        self.offsets[s]
    }

    /// `‖φ‖²_Γ`, or `Σ_i ‖λ_i‖²_{∂Ω_i∩Γ}` in the per-subdomain layout.
    pub fn l2_norm_sq(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.n_dofs() {
            return invalid(format!(
                "trace vector has length {}, space has {} dofs",
                phi.len(),
                self.n_dofs()
            ));
        }
        let mesh = self.partition.mesh();
        let q = QuadratureRule::gauss2();
        let edge_sq = |h: f64, a: f64, b: f64| -> f64 {
            q.points
                .iter()
                .zip(&q.weights)
                .map(|(s, w)| {
                    let v = (1.0 - s[0]) * a + s[0] * b;
                    h * w * v * v
                })
                .sum()
        };
        let mut total = 0.0;
        match self.layout {
            TraceLayout::SingleCopy => {
                for (k, &e) in self.partition.gamma().iter().enumerate() {
                    total += edge_sq(mesh.edge_length(e), phi[2 * k], phi[2 * k + 1]);
                }
            }
            TraceLayout::PerSubdomain => {
                for s in 0..self.partition.n_subdomains() {
                    for (k, &e) in self.partition.interface_edges(s).iter().enumerate() {
                        let o = self.offsets[s] + 2 * k;
                        total += edge_sq(mesh.edge_length(e), phi[o], phi[o + 1]);
                    }
                }
            }
        }
        Ok(total)
    }
}

/// `‖φ‖²_Γ` for single-copy trace coefficients.
pub fn interface_l2_norm_sq(trace: &TraceSpace, phi: &[f64]) -> Result<f64> {
    trace.l2_norm_sq(phi)
}
