use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{signed_area, Domain, Point, TriangleMesh};
use crate::error::{invalid, Error, Result};

/// Upper bound on the relative displacement accepted by
/// [`perturb_quasi_uniform`].
pub const MAX_PERTURBATION: f64 = 0.3;

/// `n × n` cells on the unit square, each split along its SW-NE diagonal.
/// The L-shape drops the cells of `[0.5,1)×(0,0.5]` and needs even `n`.
///
/// Vertices are numbered row by row from the bottom; each cell contributes
/// `(SW, SE, NE)` then `(SW, NE, NW)`.
pub fn generate_structured(n: usize, domain: Domain) -> Result<TriangleMesh> {
    if n < 2 {
        return invalid(format!("structured mesh needs n >= 2, got {n}"));
    }
    if domain == Domain::LShape && n % 2 != 0 {
        return invalid(format!("l-shape needs an even number of cells per side, got {n}"));
    }
    let half = n / 2;
    let keep_cell = |i: usize, j: usize| domain == Domain::UnitSquare || !(i >= half && j < half);

    let mut id = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    let h = 1.0 / n as f64;
    for j in 0..=n {
        for i in 0..=n {
            let used = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j.wrapping_sub(1))]
                .iter()
                .any(|&(ci, cj)| ci < n && cj < n && keep_cell(ci, cj));
            if used {
                id[j * (n + 1) + i] = vertices.len();
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            if !keep_cell(i, j) {
                continue;
            }
            let sw = id[j * (n + 1) + i];
            let se = id[j * (n + 1) + i + 1];
            let ne = id[(j + 1) * (n + 1) + i + 1];
            let nw = id[(j + 1) * (n + 1) + i];
            triangles.push([sw, se, ne]);
            triangles.push([sw, ne, nw]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Moves every vertex that is neither on the boundary nor listed in `pinned`
/// by a seeded random offset of length at most `factor` times the shortest
/// incident edge. If a triangle inverts, the factor is halved, down to
/// `factor / 8`.
pub fn perturb_quasi_uniform(
    mesh: &TriangleMesh,
    factor: f64,
    seed: u64,
    pinned: &[usize],
) -> Result<TriangleMesh> {
    if !(0.0..=MAX_PERTURBATION).contains(&factor) {
        return invalid(format!(
            "perturbation factor must lie in [0, {MAX_PERTURBATION}], got {factor}"
        ));
    }
    let nv = mesh.n_vertices();
    let mut fixed = mesh.boundary_vertices();
    for &v in pinned {
        if v >= nv {
            return invalid(format!("pinned vertex {v} out of range"));
        }
        fixed[v] = true;
    }
    let mut h_local = vec![f64::INFINITY; nv];
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let l = mesh.edge_length(e);
        h_local[a] = h_local[a].min(l);
        h_local[b] = h_local[b].min(l);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // offsets inside the unit disc, scaled later
    let unit: Vec<Point> = (0..nv)
        .map(|_| loop {
            let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                break p;
            }
        })
        .collect();

    let mut f = factor;
    for _attempt in 0..4 {
        let vertices: Vec<Point> = (0..nv)
            .map(|v| {
                let p = mesh.vertex(v);
                if fixed[v] || f == 0.0 {
                    p
                } else {
                    let s = f * h_local[v];
                    [p[0] + s * unit[v][0], p[1] + s * unit[v][1]]
                }
            })
            .collect();
        let inverted = mesh.triangles().iter().any(|t| {
            signed_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) <= 0.0
        });
        if !inverted {
            return TriangleMesh::new(vertices, mesh.triangles().to_vec());
        }
        f *= 0.5;
    }
    Err(Error::InvalidArgument(format!(
        "perturbation inverts a triangle even at factor {}",
        factor / 8.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_n2() {
        let sq = generate_structured(2, Domain::UnitSquare).unwrap();
        assert_eq!((sq.n_vertices(), sq.n_triangles(), sq.n_edges()), (9, 8, 16));
        let l = generate_structured(2, Domain::LShape).unwrap();
        assert_eq!(l.n_triangles(), 6);
        assert_eq!(l.n_vertices(), 8);
        assert!((l.total_area() - 0.75).abs() < 1e-14);
        // no element inside the removed quadrant
        for t in 0..l.n_triangles() {
            let c = l.centroid(t);
            assert!(!(c[0] > 0.5 && c[1] < 0.5));
        }
    }

    #[test]
    fn rejects_small_or_odd() {
        assert!(generate_structured(1, Domain::UnitSquare).is_err());
        assert!(generate_structured(3, Domain::LShape).is_err());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let m = generate_structured(6, Domain::UnitSquare).unwrap();
        let p = perturb_quasi_uniform(&m, 0.0, 7, &[]).unwrap();
        assert_eq!(m.vertices(), p.vertices());
    }

    #[test]
    fn perturbation_keeps_boundary_and_pins() {
        let m = generate_structured(8, Domain::LShape).unwrap();
        let pin = [m.n_vertices() / 2];
        let p = perturb_quasi_uniform(&m, 0.15, 42, &pin).unwrap();
        let bnd = m.boundary_vertices();
        let mut moved = 0;
        for v in 0..m.n_vertices() {
            if bnd[v] || v == pin[0] {
                assert_eq!(m.vertex(v), p.vertex(v));
            } else if m.vertex(v) != p.vertex(v) {
                moved += 1;
            }
        }
        assert!(moved > 0);
        assert!(perturb_quasi_uniform(&m, 0.31, 1, &[]).is_err());
    }
}
