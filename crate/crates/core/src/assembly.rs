//! Primal IPH assembly and the hybridized per-subdomain block system.
//!
//! On interior edges the primal form carries
//! `-{∇u}·⟦v⟧ - {∇v}·⟦u⟧ + μ/2 ⟦u⟧·⟦v⟧ - 1/(2μ) ⟦∇u⟧⟦∇v⟧`; on boundary edges
//! it carries the Nitsche terms `-∂ₙu v - ∂ₙv u + μ u v`. The local form of a
//! subdomain uses the same Nitsche terms on all of `∂Ω_i`, and the trace
//! unknown couples through `⟨∂ₙv - μv, ψ⟩` and `2⟨μλ, ψ⟩`. Eliminating the
//! trace reproduces the primal matrix exactly.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dg_space::{side_endpoints, BrokenP1Space, ElementGeometry, QuadratureRule, TraceSpace};
use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, SparseCholesky, TripletBuilder};
use crate::mesh::{EdgeSide, Partition, Point, TriangleMesh};

/// Size limit for the explicit condensation check.
pub const ELIMINATION_GUARD: usize = 5000;

/// `μ_e = α / h_e`.
#[derive(Debug, Clone)]
pub struct PenaltyField {
    alpha: f64,
    mu: Vec<f64>,
}

impl PenaltyField {
    pub fn new(mesh: &TriangleMesh, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return invalid(format!("penalty alpha must be positive, got {alpha}"));
        }
        let mu = mesh.edge_lengths().iter().map(|h| alpha / h).collect();
        Ok(Self { alpha, mu })
    }

    /// `α = c (k+1)(k+2)` with `k = 1`.
    pub fn from_constant(mesh: &TriangleMesh, c: f64) -> Result<Self> {
        Self::new(mesh, 6.0 * c)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self, e: usize) -> f64 {
        self.mu[e]
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }
}

/// Default `α = 12` (`c = 2`). With `c = 1` the structured meshes sit just
/// above the coercivity threshold and lose the L2 order.
pub const DEFAULT_ALPHA: f64 = 12.0;

// ---------------------------------------------------------------------------
// local kernels, indexed by element-local vertex

fn volume_matrix(geo: &ElementGeometry, eta: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for p in 0..3 {
        for q in 0..3 {
            let mass = geo.area / 12.0 * if p == q { 2.0 } else { 1.0 };
            let stiff = geo.area * (geo.grads[p][0] * geo.grads[q][0] + geo.grads[p][1] * geo.grads[q][1]);
            k[p][q] = eta * mass + stiff;
        }
    }
    k
}

fn load_vector(geo: &ElementGeometry, f: &(impl Fn(Point) -> f64 + ?Sized)) -> [f64; 3] {
    let q = QuadratureRule::triangle_degree2();
    let mut b = [0.0; 3];
    for (r, w) in q.points.iter().zip(&q.weights) {
        let fv = f(geo.map(*r));
        let phi = ElementGeometry::basis(*r);
        for p in 0..3 {
            b[p] += 2.0 * geo.area * w * fv * phi[p];
        }
    }
    b
}

fn edge_values(ends: [usize; 2], s: f64) -> [f64; 3] {
    let mut v = [0.0; 3];
    v[ends[0]] = 1.0 - s;
    v[ends[1]] = s;
    v
}

struct Side {
    geo: ElementGeometry,
    ends: [usize; 2],
    normal: Point,
}

impl Side {
    fn new(mesh: &TriangleMesh, e: usize, side: EdgeSide) -> Self {
        Self {
            geo: ElementGeometry::new(mesh.triangle_points(side.triangle)),
            ends: side_endpoints(mesh, e, side),
            normal: mesh.outward_normal(side.triangle, side.local),
        }
    }

    /// `∇φ_p · n` for the given normal.
    fn dn(&self, n: Point) -> [f64; 3] {
        self.geo.grads.map(|g| g[0] * n[0] + g[1] * n[1])
    }
}

/// 6×6 interior-edge block; DOFs `0..3` belong to side one, `3..6` to side
/// two.
fn interior_face(mesh: &TriangleMesh, e: usize, s1: EdgeSide, s2: EdgeSide, mu: f64) -> [[f64; 6]; 6] {
    let (a, b) = (Side::new(mesh, e, s1), Side::new(mesh, e, s2));
    let n1 = a.normal;
    let (da, db) = (a.dn(n1), b.dn(n1));
    let h = mesh.edge_length(e);
    let q = QuadratureRule::gauss2();
    let mut k = [[0.0; 6]; 6];
    let gv: [f64; 6] = [da[0], da[1], da[2], -db[0], -db[1], -db[2]];
    let fv: [f64; 6] = [da[0], da[1], da[2], db[0], db[1], db[2]].map(|x| 0.5 * x);
    for (s, w) in q.points.iter().zip(&q.weights) {
        let va = edge_values(a.ends, s[0]);
        let vb = edge_values(b.ends, s[0]);
        let jv: [f64; 6] = [va[0], va[1], va[2], -vb[0], -vb[1], -vb[2]];
        for p in 0..6 {
            for r in 0..6 {
                k[p][r] += w
                    * h
                    * (-fv[r] * jv[p] - fv[p] * jv[r] + 0.5 * mu * jv[p] * jv[r]
                        - 0.5 / mu * gv[p] * gv[r]);
            }
        }
    }
    k
}

/// Nitsche block `-∂ₙu v - ∂ₙv u + μ u v` on one side of an edge.
fn nitsche_face(mesh: &TriangleMesh, e: usize, side: EdgeSide, mu: f64) -> [[f64; 3]; 3] {
    let sd = Side::new(mesh, e, side);
    let dn = sd.dn(sd.normal);
    let h = mesh.edge_length(e);
    let q = QuadratureRule::gauss2();
    let mut k = [[0.0; 3]; 3];
    for (s, w) in q.points.iter().zip(&q.weights) {
        let v = edge_values(sd.ends, s[0]);
        for p in 0..3 {
            for r in 0..3 {
                k[p][r] += w * h * (-dn[r] * v[p] - dn[p] * v[r] + mu * v[p] * v[r]);
            }
        }
    }
    k
}

/// `⟨∂ₙφ_p - μ φ_p, ψ_d⟩_e`, rows by local vertex, columns by canonical
/// endpoint.
fn trace_coupling(mesh: &TriangleMesh, e: usize, side: EdgeSide, mu: f64) -> [[f64; 2]; 3] {
    let sd = Side::new(mesh, e, side);
    let dn = sd.dn(sd.normal);
    let h = mesh.edge_length(e);
    let q = QuadratureRule::gauss2();
    let mut k = [[0.0; 2]; 3];
    for (s, w) in q.points.iter().zip(&q.weights) {
        let v = edge_values(sd.ends, s[0]);
        let psi = [1.0 - s[0], s[0]];
        for p in 0..3 {
            for d in 0..2 {
                k[p][d] += w * h * (dn[p] - mu * v[p]) * psi[d];
            }
        }
    }
    k
}

/// `2μ h [[1/3, 1/6], [1/6, 1/3]]`
pub fn interface_block(h: f64, mu: f64) -> [[f64; 2]; 2] {
    let b = 2.0 * mu * h;
    [[b / 3.0, b / 6.0], [b / 6.0, b / 3.0]]
}

// ---------------------------------------------------------------------------

/// Assembled primal system `A u = f` with its factorization.
#[derive(Debug, Clone)]
pub struct PrimalSystem {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
    pub factor: SparseCholesky,
}

impl PrimalSystem {
    pub fn solve(&self) -> Vec<f64> {
        self.factor.solve(&self.load)
    }
}

/// The primal matrix only, without factorization.
pub fn assemble_primal_matrix(space: &BrokenP1Space, eta: f64, penalty: &PenaltyField) -> CsrMatrix {
    let mesh = space.mesh();
    let n = space.n_dofs();
    let mut t = TripletBuilder::with_capacity(n, n, 9 * mesh.n_triangles() + 36 * mesh.n_edges());
    for tri in 0..mesh.n_triangles() {
        let k = volume_matrix(&space.geometry(tri), eta);
        for p in 0..3 {
            for q in 0..3 {
                t.push(3 * tri + p, 3 * tri + q, k[p][q]);
            }
        }
    }
    for e in 0..mesh.n_edges() {
        let mu = penalty.mu(e);
        match mesh.edge_sides(e) {
            (s1, Some(s2)) => {
                let k = interior_face(mesh, e, s1, s2, mu);
                let dof = |p: usize| if p < 3 { 3 * s1.triangle + p } else { 3 * s2.triangle + p - 3 };
                for p in 0..6 {
                    for q in 0..6 {
                        t.push(dof(p), dof(q), k[p][q]);
                    }
                }
            }
            (s, None) => {
                let k = nitsche_face(mesh, e, s, mu);
                for p in 0..3 {
                    for q in 0..3 {
                        t.push(3 * s.triangle + p, 3 * s.triangle + q, k[p][q]);
                    }
                }
            }
        }
    }
    t.build()
}

pub fn assemble_load(space: &BrokenP1Space, f: &(impl Fn(Point) -> f64 + ?Sized)) -> Vec<f64> {
    let mut b = vec![0.0; space.n_dofs()];
    for t in 0..space.mesh().n_triangles() {
        let lb = load_vector(&space.geometry(t), f);
        b[3 * t..3 * t + 3].copy_from_slice(&lb);
    }
    b
}

/// Assembles and factorizes the primal IPH system. A failed factorization is
/// reported as a coercivity failure.
pub fn assemble_primal(
    space: &BrokenP1Space,
    eta: f64,
    penalty: &PenaltyField,
    f: &(impl Fn(Point) -> f64 + ?Sized),
) -> Result<PrimalSystem> {
    let matrix = assemble_primal_matrix(space, eta, penalty);
    let load = assemble_load(space, f);
    let factor = SparseCholesky::new(&matrix, "primal IPH matrix").map_err(|_| coercivity_error("primal IPH matrix", penalty.alpha()))?;
    Ok(PrimalSystem { matrix, load, factor })
}

fn coercivity_error(what: &str, alpha: f64) -> Error {
    Error::NotPositiveDefinite {
        what: what.into(),
        hint: format!("the penalty alpha = {alpha} is too small for coercivity; increase alpha"),
    }
}

/// `‖f‖²_0` with the degree-5 rule.
pub fn source_l2_norm_sq(mesh: &TriangleMesh, f: &(impl Fn(Point) -> f64 + ?Sized)) -> f64 {
    let q = QuadratureRule::triangle_degree5();
    (0..mesh.n_triangles())
        .map(|t| {
            let geo = ElementGeometry::new(mesh.triangle_points(t));
            q.points
                .iter()
                .zip(&q.weights)
                .map(|(r, w)| 2.0 * geo.area * w * f(geo.map(*r)).powi(2))
                .sum::<f64>()
        })
        .sum()
}

// ---------------------------------------------------------------------------

/// Blocks of one subdomain in its local numbering: element DOF `3·l + k` for
/// the `l`-th triangle of the subdomain, trace DOFs as in [`TraceSpace`].
#[derive(Debug, Clone)]
pub struct SubdomainBlocks {
    /// `Ã_i`
    pub a: CsrMatrix,
    /// `Ã_{iΓ}`, `n_u × n_λ`
    pub a_ig: CsrMatrix,
    /// `Ã_{Γi} = Ã_{iΓ}ᵀ`
    pub a_gi: CsrMatrix,
    /// `Ã_Γ` restricted to `∂Ω_i ∩ Γ`, block diagonal
    pub a_gamma: CsrMatrix,
    pub f: Vec<f64>,
    pub factor: SparseCholesky,
    /// Global primal DOF of every local DOF.
    pub global_dofs: Vec<usize>,
}

impl SubdomainBlocks {
    pub fn n_u(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_lambda(&self) -> usize {
        self.a_gamma.nrows()
    }
}

/// Hybridized system for a partition plus the primal system on the whole
/// mesh. Immutable after assembly.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub space: BrokenP1Space,
    pub trace: TraceSpace,
    pub penalty: PenaltyField,
    pub eta: f64,
    pub subdomains: Vec<SubdomainBlocks>,
    /// `Ã_Γ` in single-copy numbering.
    pub a_gamma: CsrMatrix,
    pub primal: PrimalSystem,
    /// `‖f‖_0` of the continuous source.
    pub source_norm: f64,
}

pub fn assemble_hybrid(
    partition: Arc<Partition>,
    trace: TraceSpace,
    eta: f64,
    penalty: PenaltyField,
    f: &(impl Fn(Point) -> f64 + Sync + ?Sized),
) -> Result<BlockSystem> {
    if !Arc::ptr_eq(trace.partition(), &partition) {
        return invalid("trace space was built on a different partition");
    }
    let mesh = partition.mesh().clone();
    if penalty.values().len() != mesh.n_edges() {
        return invalid("penalty field does not match the mesh");
    }
    let space = BrokenP1Space::new(mesh.clone(), 1)?;
    let primal = assemble_primal(&space, eta, &penalty, f)?;

    let subdomains = (0..partition.n_subdomains())
        .into_par_iter()
        .map(|s| assemble_subdomain(&partition, &trace, s, eta, &penalty, &primal.load))
        .collect::<Result<Vec<_>>>()?;

    let n_gamma = 2 * partition.gamma().len();
    let mut tg = TripletBuilder::new(n_gamma, n_gamma);
    for (k, &e) in partition.gamma().iter().enumerate() {
        let b = interface_block(mesh.edge_length(e), penalty.mu(e));
        for p in 0..2 {
            for q in 0..2 {
                tg.push(2 * k + p, 2 * k + q, b[p][q]);
            }
        }
    }
    let source_norm = source_l2_norm_sq(&mesh, f).sqrt();
    Ok(BlockSystem {
        space,
        trace,
        penalty,
        eta,
        subdomains,
        a_gamma: tg.build(),
        primal,
        source_norm,
    })
}

fn assemble_subdomain(
    partition: &Partition,
    trace: &TraceSpace,
    s: usize,
    eta: f64,
    penalty: &PenaltyField,
    global_load: &[f64],
) -> Result<SubdomainBlocks> {
    let mesh = partition.mesh();
    let tris = partition.triangles(s);
    let n_u = 3 * tris.len();
    let n_l = trace.n_local(s);
    let ldof = |side: EdgeSide, k: usize| 3 * partition.local_index(side.triangle) + k;

    let mut ta = TripletBuilder::with_capacity(n_u, n_u, 45 * tris.len());
    let mut global_dofs = Vec::with_capacity(n_u);
    for (l, &t) in tris.iter().enumerate() {
        let k = volume_matrix(&ElementGeometry::new(mesh.triangle_points(t)), eta);
        for p in 0..3 {
            for q in 0..3 {
                ta.push(3 * l + p, 3 * l + q, k[p][q]);
            }
            global_dofs.push(3 * t + p);
        }
    }
    // interior edges of the subdomain, then Nitsche terms on ∂Ω_i
    let mut seen_edges = std::collections::HashSet::new();
    for &t in tris {
        for e in mesh.triangle_edges(t) {
            if !seen_edges.insert(e) {
                continue;
            }
            let mu = penalty.mu(e);
            match mesh.edge_sides(e) {
                (s1, Some(s2)) if partition.subdomain_of(s1.triangle) == partition.subdomain_of(s2.triangle) => {
                    let k = interior_face(mesh, e, s1, s2, mu);
                    let dof = |p: usize| if p < 3 { ldof(s1, p) } else { ldof(s2, p - 3) };
                    for p in 0..6 {
                        for q in 0..6 {
                            ta.push(dof(p), dof(q), k[p][q]);
                        }
                    }
                }
                (s1, s2) => {
                    let side = if partition.subdomain_of(s1.triangle) == s { s1 } else { s2.unwrap() };
                    let k = nitsche_face(mesh, e, side, mu);
                    for p in 0..3 {
                        for q in 0..3 {
                            ta.push(ldof(side, p), ldof(side, q), k[p][q]);
                        }
                    }
                }
            }
        }
    }
    let a = ta.build();

    let mut tc = TripletBuilder::new(n_u, n_l);
    let mut tg = TripletBuilder::new(n_l, n_l);
    for &e in partition.interface_edges(s) {
        let (s1, s2) = mesh.edge_sides(e);
        let side = if partition.subdomain_of(s1.triangle) == s { s1 } else { s2.unwrap() };
        let mu = penalty.mu(e);
        let d = trace.local_edge_dofs(s, e).expect("interface edge has local trace dofs");
        let c = trace_coupling(mesh, e, side, mu);
        for p in 0..3 {
            for j in 0..2 {
                tc.push(ldof(side, p), d[j], c[p][j]);
            }
        }
        let b = interface_block(mesh.edge_length(e), mu);
        for i in 0..2 {
            for j in 0..2 {
                tg.push(d[i], d[j], b[i][j]);
            }
        }
    }
    let a_ig = tc.build();
    let a_gi = a_ig.transpose();
    let f = global_dofs.iter().map(|&g| global_load[g]).collect();
    let factor = SparseCholesky::new(&a, &format!("local matrix of subdomain {s}"))
        .map_err(|_| coercivity_error(&format!("local matrix of subdomain {s}"), penalty.alpha()))?;
    Ok(SubdomainBlocks {
        a,
        a_ig,
        a_gi,
        a_gamma: tg.build(),
        f,
        factor,
        global_dofs,
    })
}

impl BlockSystem {
    pub fn n_subdomains(&self) -> usize {
        self.subdomains.len()
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        self.space.mesh()
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.trace.partition()
    }

    /// Number of single-copy trace DOFs.
    pub fn n_gamma(&self) -> usize {
        self.a_gamma.nrows()
    }

    /// Restriction of a global primal vector to subdomain `s`.
    pub fn gather(&self, s: usize, u: &[f64]) -> Vec<f64> {
        self.subdomains[s].global_dofs.iter().map(|&g| u[g]).collect()
    }

    /// Writes local values of subdomain `s` into a global primal vector.
    pub fn scatter(&self, s: usize, local: &[f64], u: &mut [f64]) {
        for (&g, &v) in self.subdomains[s].global_dofs.iter().zip(local) {
            u[g] = v;
        }
    }

    /// Single-copy trace vector restricted to subdomain `s`.
    pub fn trace_gather(&self, s: usize, lambda: &[f64]) -> Vec<f64> {
        (0..self.trace.n_local(s))
            .map(|d| lambda[self.shared_trace_dof(s, d)])
            .collect()
    }

    /// Adds local trace values of subdomain `s` into a single-copy vector.
    pub fn trace_scatter_add(&self, s: usize, local: &[f64], lambda: &mut [f64]) {
        for (d, &v) in local.iter().enumerate() {
            lambda[self.shared_trace_dof(s, d)] += v;
        }
    }

    /// Single-copy index of local trace DOF `d` of subdomain `s`.
    pub fn shared_trace_dof(&self, s: usize, d: usize) -> usize {
        let e = self.partition().interface_edges(s)[d / 2];
        self.trace.shared_edge_dofs(e).unwrap()[d % 2]
    }

    /// The full hybrid matrix `[[Ã_u, Ã_uΓ], [Ã_Γu, Ã_Γ]]` with `u` in global
    /// primal numbering followed by the single-copy trace.
    pub fn hybrid_matrix(&self) -> CsrMatrix {
        let nu = self.space.n_dofs();
        let n = nu + self.n_gamma();
        let mut t = TripletBuilder::new(n, n);
        for (s, sub) in self.subdomains.iter().enumerate() {
            for (r, c, v) in sub.a.iter() {
                t.push(sub.global_dofs[r], sub.global_dofs[c], v);
            }
            for (r, c, v) in sub.a_ig.iter() {
                let g = nu + self.shared_trace_dof(s, c);
                t.push(sub.global_dofs[r], g, v);
                t.push(g, sub.global_dofs[r], v);
            }
        }
        for (r, c, v) in self.a_gamma.iter() {
            t.push(nu + r, nu + c, v);
        }
        t.build()
    }

    /// Hybrid right-hand side `(f, 0)` matching [`Self::hybrid_matrix`].
    pub fn hybrid_load(&self) -> Vec<f64> {
        let mut b = self.primal.load.clone();
        b.resize(self.space.n_dofs() + self.n_gamma(), 0.0);
        b
    }

    /// Checks that the full hybrid matrix is positive definite by sparse
    /// Cholesky, within the elimination guard.
    pub fn check_hybrid_positive_definite(&self) -> Result<()> {
        let n = self.space.n_dofs() + self.n_gamma();
        if n > ELIMINATION_GUARD {
            return Err(Error::SizeGuard {
                what: "hybrid positive-definiteness check".into(),
                size: n,
                limit: ELIMINATION_GUARD,
            });
        }
        SparseCholesky::new(&self.hybrid_matrix(), "hybrid system").map(|_| ())
    }

    /// The matrix obtained by eliminating `λ` from the hybrid system, in
    /// global primal numbering. `Ã_Γ` is block diagonal, so the Schur
    /// correction is formed edge by edge.
    pub fn condensed_matrix(&self) -> Result<CsrMatrix> {
        let nu = self.space.n_dofs();
        let total = nu + self.n_gamma();
        if total > ELIMINATION_GUARD {
            return Err(Error::SizeGuard {
                what: "lambda elimination".into(),
                size: total,
                limit: ELIMINATION_GUARD,
            });
        }
        let nl = self.n_gamma();
        // columns of the global coupling, gathered per single-copy trace DOF
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nl];
        let mut t = TripletBuilder::new(nu, nu);
        for (s, sub) in self.subdomains.iter().enumerate() {
            for (r, c, v) in sub.a.iter() {
                t.push(sub.global_dofs[r], sub.global_dofs[c], v);
            }
            for (r, c, v) in sub.a_ig.iter() {
                cols[self.shared_trace_dof(s, c)].push((sub.global_dofs[r], v));
            }
        }
        for k in 0..nl / 2 {
            let (d0, d1) = (2 * k, 2 * k + 1);
            let m = [
                [self.a_gamma.get(d0, d0), self.a_gamma.get(d0, d1)],
                [self.a_gamma.get(d1, d0), self.a_gamma.get(d1, d1)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det <= 0.0 {
                return Err(Error::Singular(format!("interface block {k} has determinant {det:e}")));
            }
            let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
            let d = [d0, d1];
            for a in 0..2 {
                for b in 0..2 {
                    for &(r, vr) in &cols[d[a]] {
                        for &(c, vc) in &cols[d[b]] {
                            t.push(r, c, -vr * inv[a][b] * vc);
                        }
                    }
                }
            }
        }
        Ok(t.build())
    }

    /// Largest entrywise discrepancy between the condensed hybrid matrix and
    /// `a_primal`, relative to `max |a_primal|`.
    pub fn eliminate_lambda_check(&self, a_primal: &CsrMatrix) -> Result<f64> {
        Ok(max_relative_discrepancy(&self.condensed_matrix()?, a_primal))
    }
}

/// `max |a_ij - b_ij| / max |b_ij|` over the union of both patterns.
pub fn max_relative_discrepancy(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    let d1 = a.iter().map(|(r, c, v)| (v - b.get(r, c)).abs()).fold(0.0, f64::max);
    let d2 = b.iter().map(|(r, c, v)| (v - a.get(r, c)).abs()).fold(0.0, f64::max);
    d1.max(d2) / scale
}
