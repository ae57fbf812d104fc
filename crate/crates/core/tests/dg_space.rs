use std::sync::Arc;

use iph_dd::dg_space::{edge_mass, interface_l2_norm_sq, jump_average_on_edge, QuadratureRule};
use iph_dd::mesh::{generate_structured, partition_mesh, perturb_quasi_uniform, EdgeSide, TriangleMesh};
use iph_dd::{BrokenP1Space, Domain, Error, PartitionStrategy, PenaltyField, TraceSpace};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(n: usize) -> BrokenP1Space {
    BrokenP1Space::new(Arc::new(generate_structured(n, Domain::UnitSquare).unwrap()), 1).unwrap()
}

fn first_interior_edge(mesh: &TriangleMesh) -> usize {
    (0..mesh.n_edges()).find(|&e| !mesh.is_boundary_edge(e)).unwrap()
}

#[test]
fn continuous_trace_has_zero_jump() {
    let mesh = generate_structured(4, Domain::UnitSquare).unwrap();
    let e = first_interior_edge(&mesh);
    let (s1, s2) = mesh.edge_sides(e);
    let q = [0.3, -1.7];
    let ja = jump_average_on_edge(&mesh, e, (s1, q), Some((s2.unwrap(), q)));
    for p in 0..2 {
        assert!(ja.jump[p][0].abs() < 1e-15 && ja.jump[p][1].abs() < 1e-15);
        assert_eq!(ja.average[p], q[p]);
    }
}

#[test]
fn unit_jump_across_vertical_edge() {
    // two triangles sharing the edge x = 0 from (0,0) to (0,1)
    let mesh = TriangleMesh::new(
        vec![[0.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [1.0, 0.5]],
        vec![[0, 1, 2], [0, 3, 1]],
    )
    .unwrap();
    let e = (0..mesh.n_edges()).find(|&e| mesh.edge(e) == [0, 1]).unwrap();
    let (s1, s2) = mesh.edge_sides(e);
    let s2 = s2.unwrap();
    // orient so that the left side has n = (1, 0)
    let (left, right) = if mesh.outward_normal(s1.triangle, s1.local)[0] > 0.0 { (s1, s2) } else { (s2, s1) };
    let ja = jump_average_on_edge(&mesh, e, (left, [1.0, 1.0]), Some((right, [0.0, 0.0])));
    for p in 0..2 {
        assert!((ja.jump[p][0] - 1.0).abs() < 1e-15 && ja.jump[p][1].abs() < 1e-15);
        assert_eq!(ja.average[p], 0.5);
    }
}

#[test]
fn boundary_jump_is_value_times_normal() {
    let mesh = generate_structured(2, Domain::UnitSquare).unwrap();
    let e = (0..mesh.n_edges()).find(|&e| mesh.is_boundary_edge(e)).unwrap();
    let (s, _) = mesh.edge_sides(e);
    let n = mesh.outward_normal(s.triangle, s.local);
    let q = [2.0, -0.5];
    let ja = jump_average_on_edge(&mesh, e, (s, q), None);
    for p in 0..2 {
        assert_eq!(ja.jump[p], [q[p] * n[0], q[p] * n[1]]);
        assert_eq!(ja.average[p], q[p]);
    }
}

#[test]
fn jump_average_ignores_side_order() {
    let mesh = perturb_quasi_uniform(&generate_structured(6, Domain::UnitSquare).unwrap(), 0.2, 1, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for e in 0..mesh.n_edges() {
        let (s1, s2) = mesh.edge_sides(e);
        let Some(s2) = s2 else { continue };
        let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let b = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let x = jump_average_on_edge(&mesh, e, (s1, a), Some((s2, b)));
        let y = jump_average_on_edge(&mesh, e, (s2, b), Some((s1, a)));
        for p in 0..2 {
            for c in 0..2 {
                assert!((x.jump[p][c] - y.jump[p][c]).abs() <= 1e-15 * (1.0 + x.jump[p][c].abs()));
            }
            assert!((x.average[p] - y.average[p]).abs() <= 1e-15);
        }
    }
}

#[test]
fn dg_norm_examples() {
    let sp = space(4);
    let mesh = sp.mesh().clone();
    let pen = PenaltyField::new(&mesh, 6.0).unwrap();
    let zero = vec![0.0; sp.n_dofs()];
    assert_eq!(sp.dg_norm_sq(&zero, 1.0, pen.values()).unwrap(), 0.0);
    assert!(matches!(sp.dg_norm_sq(&zero[1..], 1.0, pen.values()), Err(Error::InvalidArgument(_))));

    // continuous hat at the centre vertex: only the gradient term survives
    let hat = sp.interpolate(|p| {
        let d = ((p[0] - 0.5).abs()).max((p[1] - 0.5).abs());
        (1.0 - 4.0 * d).max(0.0)
    });
    let g = sp.grad_norm_sq(&hat).unwrap();
    let d = sp.dg_norm_sq(&hat, 0.0, pen.values()).unwrap();
    assert!(g > 0.0 && (d - g).abs() < 1e-12 * g);

    // indicator of one triangle: Σ μ_e |e| over its edges, by Gauss quadrature
    let t = 5;
    let mut ind = zero.clone();
    ind[3 * t..3 * t + 3].copy_from_slice(&[1.0; 3]);
    let q = QuadratureRule::gauss2();
    let want: f64 = mesh
        .triangle_edges(t)
        .iter()
        .map(|&e| q.weights.iter().map(|w| pen.mu(e) * mesh.edge_length(e) * w).sum::<f64>())
        .sum();
    let got = sp.dg_norm_sq(&ind, 0.0, pen.values()).unwrap();
    assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
}

#[test]
fn interface_norm_examples() {
    let mesh = Arc::new(generate_structured(8, Domain::UnitSquare).unwrap());
    let part = Arc::new(partition_mesh(mesh.clone(), PartitionStrategy::TwoNonstraight).unwrap());
    let tr = TraceSpace::single_copy(part.clone());
    let n = tr.n_dofs();
    assert_eq!(n, 2 * part.gamma().len());
    assert_eq!(interface_l2_norm_sq(&tr, &vec![0.0; n]).unwrap(), 0.0);
    let one = interface_l2_norm_sq(&tr, &vec![1.0; n]).unwrap();
    let len = part.interface_length();
    assert!((one - len).abs() < 1e-14, "{one} vs {len}");
    let mut basis = vec![0.0; n];
    basis[0] = 1.0;
    let h = mesh.edge_length(part.gamma()[0]);
    assert!((interface_l2_norm_sq(&tr, &basis).unwrap() - h / 3.0).abs() < 1e-15);
    assert!((edge_mass(h, 1.0, 0.0) - h / 3.0).abs() < 1e-16);
    assert!(interface_l2_norm_sq(&tr, &basis[1..]).is_err());

    let per = TraceSpace::per_subdomain(part.clone());
    assert_eq!(per.n_dofs(), 2 * n);
}

#[test]
fn only_degree_one() {
    let mesh = Arc::new(generate_structured(2, Domain::UnitSquare).unwrap());
    assert!(BrokenP1Space::new(mesh.clone(), 2).is_err());
    let sp = BrokenP1Space::new(mesh, 1).unwrap();
    assert_eq!(sp.n_dofs(), 24);
}

#[test]
fn nodal_basis_is_local() {
    let sp = space(3);
    let mesh = sp.mesh();
    let mut u = vec![0.0; sp.n_dofs()];
    u[sp.dof(4, 1)] = 1.0;
    for t in 0..mesh.n_triangles() {
        let c = sp.element_coeffs(&u, t);
        if t == 4 {
            assert_eq!(c, [0.0, 1.0, 0.0]);
        } else {
            assert_eq!(c, [0.0; 3]);
            assert_eq!(sp.element_l2_norm_sq(&u, t), 0.0);
        }
    }
}

/// Largest per-level trace and inverse ratios over random P1 functions.
fn local_ratios(mesh: &TriangleMesh, seed: u64) -> (f64, f64) {
    let sp = BrokenP1Space::new(Arc::new(mesh.clone()), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut trace, mut inverse) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let u: Vec<f64> = (0..sp.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for t in 0..mesh.n_triangles() {
            let h = mesh.diameter(t);
            let l2 = sp.element_l2_norm_sq(&u, t);
            trace = trace.max(sp.element_boundary_norm_sq(&u, t) * h / l2);
            inverse = inverse.max((sp.element_grad_norm_sq(&u, t) / l2).sqrt() * h);
        }
    }
    (trace, inverse)
}

#[test]
fn trace_and_inverse_inequalities_are_stable() {
    let mut prev: Option<(f64, f64)> = None;
    for n in [4, 8, 16, 32] {
        let mesh = perturb_quasi_uniform(&generate_structured(n, Domain::UnitSquare).unwrap(), 0.15, 3, &[]).unwrap();
        let r = local_ratios(&mesh, n as u64);
        assert!(r.0.is_finite() && r.1.is_finite());
        if let Some(p) = prev {
            assert!(r.0 <= 1.5 * p.0, "trace ratio grew {} -> {}", p.0, r.0);
            assert!(r.1 <= 1.5 * p.1, "inverse ratio grew {} -> {}", p.1, r.1);
        }
        prev = Some(r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dg_norm_is_positive_and_homogeneous(seed in any::<u64>(), s in 0.1f64..10.0) {
        let sp = space(4);
        let pen = PenaltyField::new(sp.mesh(), 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..sp.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let su: Vec<f64> = u.iter().map(|v| s * v).collect();
        let a = sp.dg_norm_sq(&u, 1.0, pen.values()).unwrap();
        let b = sp.dg_norm_sq(&su, 1.0, pen.values()).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((b - s * s * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn l2_norm_matches_degree5_error_against_zero(seed in any::<u64>()) {
        let sp = space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..sp.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = sp.l2_norm_sq(&u).unwrap();
        let b = sp.l2_error_sq(&u, |_| 0.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a);
    }
}

#[test]
fn edge_side_lookup_is_consistent() {
    let sp = space(3);
    let mesh = sp.mesh();
    let u = sp.interpolate(|p| 2.0 * p[0] - p[1]);
    for e in 0..mesh.n_edges() {
        let (s1, s2) = mesh.edge_sides(e);
        let [a, b] = mesh.edge(e);
        let want = [2.0 * mesh.vertex(a)[0] - mesh.vertex(a)[1], 2.0 * mesh.vertex(b)[0] - mesh.vertex(b)[1]];
        let sides: Vec<EdgeSide> = std::iter::once(s1).chain(s2).collect();
        for s in sides {
            let got = sp.edge_trace(&u, e, s);
            assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
        }
    }
}
