use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use super::{point_set_diameter, TriangleMesh};
use crate::error::{invalid, Result};

const NEST_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Cut along `x = 0.5`.
    TwoStraight,
    /// Staircase around `x = 0.5`: in horizontal bands of height 1/4 the cut
    /// alternates between `x = 0.5` (even bands) and `x = 0.5 + 1/n` (odd
    /// bands). Requires a structured mesh with `n % 4 == 0`.
    TwoNonstraight,
    /// `m × m` coarse cells split along their SW-NE diagonal: `2m²`
    /// triangular subdomains (fewer on the L-shape).
    CoarseGrid(usize),
    /// `m × m` square subdomains.
    Boxes(usize),
}

impl std::str::FromStr for PartitionStrategy {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_m = |arg: &str| -> Result<usize> {
            arg.trim_end_matches(')')
                .parse::<usize>()
                .or_else(|_| invalid(format!("bad partition size in '{s}'")))
        };
        match s {
            "two-straight" => Ok(Self::TwoStraight),
            "two-nonstraight" => Ok(Self::TwoNonstraight),
            _ => {
                if let Some(rest) = s.strip_prefix("coarse-grid(") {
                    Ok(Self::CoarseGrid(parse_m(rest)?))
                } else if let Some(rest) = s.strip_prefix("boxes(") {
                    Ok(Self::Boxes(parse_m(rest)?))
                } else {
                    invalid(format!("unknown partition strategy '{s}'"))
                }
            }
        }
    }
}

/// Element-to-subdomain map with the derived interface structure.
///
/// Triangles of subdomain `i` are numbered locally in increasing global
/// order; the same holds for its interface and exterior edge lists.
#[derive(Debug, Clone)]
pub struct Partition {
    mesh: Arc<TriangleMesh>,
    subdomain_of: Vec<usize>,
    local_index: Vec<usize>,
    triangles_of: Vec<Vec<usize>>,
    interface_edges: BTreeMap<(usize, usize), Vec<usize>>,
    gamma: Vec<usize>,
    interface_edges_of: Vec<Vec<usize>>,
    exterior_edges_of: Vec<Vec<usize>>,
    edge_pair: Vec<Option<(usize, usize)>>,
    h_subdomain: f64,
    h_omega: f64,
}

pub fn partition_mesh(mesh: Arc<TriangleMesh>, strategy: PartitionStrategy) -> Result<Partition> {
    let nt = mesh.n_triangles();
    let mut raw = Vec::with_capacity(nt);
    match strategy {
        PartitionStrategy::TwoStraight => {
            for t in 0..nt {
                raw.push(usize::from(mesh.centroid(t)[0] >= 0.5));
            }
        }
        PartitionStrategy::TwoNonstraight => {
            let w = mesh.edge_lengths().iter().copied().fold(f64::INFINITY, f64::min);
            let n = (1.0 / w).round() as usize;
            if n == 0 || (n as f64 * w - 1.0).abs() > 1e-9 || n % 4 != 0 {
                return invalid(format!(
                    "two-nonstraight needs a structured mesh with n divisible by 4 (shortest edge {w})"
                ));
            }
            let w = 1.0 / n as f64;
            for t in 0..nt {
                let c = mesh.centroid(t);
                let band = (4.0 * c[1]).floor() as i64;
                let cut = if band % 2 == 1 { 0.5 + w } else { 0.5 };
                // Rightward steps follow the cell diagonal, leftward steps a
                // horizontal edge, so no triangle gets two interface edges.
                let top = (band + 1) as f64 / 4.0;
                let (x, y) = ((c[0] - 0.5) / w, (c[1] - (top - w)) / w);
                let diagonal_step = band % 2 == 0 && band < 3 && (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) && y > x;
                raw.push(usize::from(c[0] >= cut && !diagonal_step));
            }
        }
        PartitionStrategy::CoarseGrid(m) | PartitionStrategy::Boxes(m) => {
            if m == 0 {
                return invalid("coarse grid size must be positive");
            }
            let diag = matches!(strategy, PartitionStrategy::CoarseGrid(_));
            let mf = m as f64;
            for t in 0..nt {
                let c = mesh.centroid(t);
                let ci = ((c[0] * mf).floor() as usize).min(m - 1);
                let cj = ((c[1] * mf).floor() as usize).min(m - 1);
                let upper = diag && (c[1] * mf - cj as f64) > (c[0] * mf - ci as f64);
                for p in mesh.triangle_points(t) {
                    let x = p[0] * mf - ci as f64;
                    let y = p[1] * mf - cj as f64;
                    let in_cell = (-NEST_TOL..=1.0 + NEST_TOL).contains(&x)
                        && (-NEST_TOL..=1.0 + NEST_TOL).contains(&y);
                    let in_half = !diag || if upper { y - x >= -NEST_TOL } else { x - y >= -NEST_TOL };
                    if !(in_cell && in_half) {
                        return invalid(format!(
                            "triangle {t} is not nested in coarse cell ({ci}, {cj}) of the {m}x{m} coarse grid"
                        ));
                    }
                }
                let cell = cj * m + ci;
                raw.push(if diag { 2 * cell + usize::from(upper) } else { cell });
            }
        }
    }
    // compact ids, dropping coarse pieces that contain no element
    let max_id = raw.iter().copied().max().unwrap_or(0);
    let mut remap = vec![usize::MAX; max_id + 1];
    for &r in &raw {
        remap[r] = 0;
    }
    let mut next = 0;
    for v in remap.iter_mut().filter(|v| **v == 0) {
        *v = next;
        next += 1;
    }
    let assignment = raw.iter().map(|&r| remap[r]).collect();
    Partition::from_assignment(mesh, assignment)
}

impl Partition {
    /// Validates a per-triangle assignment: ids must be `0..N_s` with every
    /// subdomain non-empty and edge-connected.
    pub fn from_assignment(mesh: Arc<TriangleMesh>, subdomain_of: Vec<usize>) -> Result<Self> {
        let nt = mesh.n_triangles();
        if subdomain_of.len() != nt {
            return invalid(format!(
                "assignment has {} entries for {nt} triangles",
                subdomain_of.len()
            ));
        }
        let ns = subdomain_of.iter().copied().max().map_or(0, |m| m + 1);
        let mut triangles_of = vec![Vec::new(); ns];
        let mut local_index = vec![0; nt];
        for (t, &s) in subdomain_of.iter().enumerate() {
            local_index[t] = triangles_of[s].len();
            triangles_of[s].push(t);
        }
        if let Some(s) = triangles_of.iter().position(|v| v.is_empty()) {
            return invalid(format!("subdomain {s} is empty"));
        }

        let mut interface_edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut interface_edges_of = vec![Vec::new(); ns];
        let mut exterior_edges_of = vec![Vec::new(); ns];
        let mut edge_pair = vec![None; mesh.n_edges()];
        let mut gamma = Vec::new();
        for e in 0..mesh.n_edges() {
            match mesh.edge_sides(e) {
                (a, None) => exterior_edges_of[subdomain_of[a.triangle]].push(e),
                (a, Some(b)) => {
                    let (si, sj) = (subdomain_of[a.triangle], subdomain_of[b.triangle]);
                    if si != sj {
                        let key = (si.min(sj), si.max(sj));
                        interface_edges.entry(key).or_default().push(e);
                        interface_edges_of[si].push(e);
                        interface_edges_of[sj].push(e);
                        edge_pair[e] = Some(key);
                        gamma.push(e);
                    }
                }
            }
        }

        // edge connectivity of each subdomain
        let mut seen = vec![false; nt];
        for (s, tris) in triangles_of.iter().enumerate() {
            let mut queue = VecDeque::from([tris[0]]);
            seen[tris[0]] = true;
            let mut count = 0;
            while let Some(t) = queue.pop_front() {
                count += 1;
                for e in mesh.triangle_edges(t) {
                    if let (a, Some(b)) = mesh.edge_sides(e) {
                        let other = if a.triangle == t { b.triangle } else { a.triangle };
                        if subdomain_of[other] == s && !seen[other] {
                            seen[other] = true;
                            queue.push_back(other);
                        }
                    }
                }
            }
            if count != tris.len() {
                return invalid(format!("subdomain {s} is not edge-connected"));
            }
        }

        let h_subdomain = triangles_of
            .iter()
            .map(|tris| {
                point_set_diameter(tris.iter().flat_map(|&t| mesh.triangle_points(t)).collect())
            })
            .fold(0.0, f64::max);
        let h_omega = mesh.domain_diameter();

        Ok(Self {
            mesh,
            subdomain_of,
            local_index,
            triangles_of,
            interface_edges,
            gamma,
            interface_edges_of,
            exterior_edges_of,
            edge_pair,
            h_subdomain,
            h_omega,
        })
    }

    /// The same assignment on another mesh with identical connectivity, e.g.
    /// a perturbed copy.
    pub fn transfer(&self, mesh: Arc<TriangleMesh>) -> Result<Self> {
        if mesh.triangles() != self.mesh.triangles() {
            return invalid("transfer needs a mesh with the same triangles");
        }
        Self::from_assignment(mesh, self.subdomain_of.clone())
    }

    pub fn mesh(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn n_subdomains(&self) -> usize {
        self.triangles_of.len()
    }

    pub fn subdomain_of(&self, t: usize) -> usize {
        self.subdomain_of[t]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.subdomain_of
    }

    /// Position of triangle `t` within its subdomain.
    pub fn local_index(&self, t: usize) -> usize {
        self.local_index[t]
    }

    pub fn triangles(&self, s: usize) -> &[usize] {
        &self.triangles_of[s]
    }

    /// `Γ_ij` for `i < j`, keyed by the pair.
    pub fn interface_pairs(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.interface_edges
    }

    /// All interface edges, increasing.
    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    /// Interface edges on `∂Ω_s`, increasing.
    pub fn interface_edges(&self, s: usize) -> &[usize] {
        &self.interface_edges_of[s]
    }

    /// Edges of `∂Ω_s ∩ ∂Ω`, increasing.
    pub fn exterior_edges(&self, s: usize) -> &[usize] {
        &self.exterior_edges_of[s]
    }

    /// The pair `(i, j)`, `i < j`, if `e` lies on `Γ_ij`.
    pub fn interface_pair(&self, e: usize) -> Option<(usize, usize)> {
        self.edge_pair[e]
    }

    pub fn is_interface_edge(&self, e: usize) -> bool {
        self.edge_pair[e].is_some()
    }

    /// `H`, the largest subdomain diameter.
    pub fn h_subdomain(&self) -> f64 {
        self.h_subdomain
    }

    /// `H_Ω`, the diameter of the domain.
    pub fn h_omega(&self) -> f64 {
        self.h_omega
    }

    /// Total length of `Γ`.
    pub fn interface_length(&self) -> f64 {
        self.gamma.iter().map(|&e| self.mesh.edge_length(e)).sum()
    }

    /// Vertices touched by an interface edge, increasing and unique.
    pub fn interface_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.gamma.iter().flat_map(|&e| self.mesh.edge(e)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Vertices shared by three or more subdomains.
    pub fn cross_points(&self) -> Vec<usize> {
        let mut touching: Vec<Vec<usize>> = vec![Vec::new(); self.mesh.n_vertices()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            for &v in tri {
                let s = self.subdomain_of[t];
                if !touching[v].contains(&s) {
                    touching[v].push(s);
                }
            }
        }
        (0..self.mesh.n_vertices())
            .filter(|&v| touching[v].len() >= 3)
            .collect()
    }
}
