mod common;

use common::{block_system, max_diff};
use iph_dd::dg_space::TraceLayout;
use iph_dd::krylov::{gmres, pcg, AdditiveSchwarz, Identity, KrylovConfig, LinearOperator, Preconditioner};
use iph_dd::linalg::{dot, CsrMatrix, TripletBuilder};
use iph_dd::schwarz::{build_augmented, InitialGuess};
use iph_dd::{Domain, PartitionStrategy};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn identity(n: usize) -> CsrMatrix {
    let mut t = TripletBuilder::new(n, n);
    (0..n).for_each(|i| t.push(i, i, 1.0));
    t.build()
}

fn cfg(tol: f64) -> KrylovConfig {
    KrylovConfig {
        tol,
        ..KrylovConfig::default()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Dense matrix of a preconditioner by applying it to unit vectors.
fn probe(m: &impl Preconditioner, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut z = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        m.apply(&e, &mut z);
        e[k] = 0.0;
        out.set_column(k, &nalgebra::DVector::from_column_slice(&z));
    }
    out
}

#[test]
fn zero_right_hand_side() {
    let bs = block_system(4, Domain::UnitSquare, PartitionStrategy::TwoStraight, TraceLayout::SingleCopy);
    let a = &bs.primal.matrix;
    let n = a.nrows();
    let m = AdditiveSchwarz::from_block_system(&bs).unwrap();
    let (x, r) = pcg(a, &m, &vec![0.0; n], &vec![0.0; n], &cfg(1e-10)).unwrap();
    assert!(x.iter().all(|&v| v == 0.0) && r.iterations == 0 && r.converged);
    let (x, r) = gmres(a, &m, &vec![0.0; n], &vec![0.0; n], &cfg(1e-10)).unwrap();
    assert!(x.iter().all(|&v| v == 0.0) && r.iterations == 0 && r.converged);
    assert!(pcg(a, &m, &vec![0.0; n + 1], &vec![0.0; n], &cfg(1e-10)).is_err());
}

#[test]
fn identity_operator_takes_one_step() {
    let a = identity(17);
    let b: Vec<f64> = (0..17).map(|i| i as f64 - 3.0).collect();
    let (x, r) = pcg(&a, &Identity, &b, &vec![0.0; 17], &cfg(1e-12)).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(max_diff(&x, &b) < 1e-15);
    let (x, r) = gmres(&a, &Identity, &b, &vec![0.0; 17], &cfg(1e-12)).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(max_diff(&x, &b) < 1e-15);
}

#[test]
fn two_by_two_gmres_is_exact() {
    let mut t = TripletBuilder::new(2, 2);
    t.push(0, 0, 2.0);
    t.push(0, 1, 1.0);
    t.push(1, 0, -3.0);
    t.push(1, 1, 4.0);
    let a = t.build();
    // inverse is [[4, -1], [3, 2]] / 11
    let b = [1.0, 2.0];
    let want = [(4.0 - 2.0) / 11.0, (3.0 + 4.0) / 11.0];
    let (x, r) = gmres(&a, &Identity, &b, &[0.0, 0.0], &cfg(1e-14)).unwrap();
    assert!(r.iterations <= 2 && r.converged);
    assert!(max_diff(&x, &want) < 1e-14);
}

#[test]
fn single_block_additive_schwarz_is_exact() {
    let bs = block_system(8, Domain::UnitSquare, PartitionStrategy::TwoStraight, TraceLayout::SingleCopy);
    let a = &bs.primal.matrix;
    let n = a.nrows();
    let m = AdditiveSchwarz::new(a, &[(0..n).collect()]).unwrap();
    let (x, r) = pcg(a, &m, &bs.primal.load, &vec![0.0; n], &cfg(1e-10)).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(max_diff(&x, &bs.primal.solve()) <= 1e-12 * max_abs(&x));
}

#[test]
fn additive_schwarz_probing_and_symmetry() {
    let bs = block_system(4, Domain::UnitSquare, PartitionStrategy::Boxes(2), TraceLayout::PerSubdomain);
    let a = &bs.primal.matrix;
    let n = a.nrows();
    let m = AdditiveSchwarz::from_block_system(&bs).unwrap();
    let minv = probe(&m, n);
    let mm = minv.clone().try_inverse().unwrap();
    // block diagonal of A
    let mut owner = vec![0; n];
    for (s, sub) in bs.subdomains.iter().enumerate() {
        sub.global_dofs.iter().for_each(|&d| owner[d] = s);
    }
    let mut bd = DMatrix::zeros(n, n);
    for (r, c, v) in a.iter() {
        if owner[r] == owner[c] {
            bd[(r, c)] = v;
        }
    }
    let scale = bd.amax();
    assert!((&mm - &bd).amax() <= 1e-12 * scale, "{}", (&mm - &bd).amax() / scale);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut zx, mut zy) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..10 {
        let (x, y) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
        m.apply(&x, &mut zx);
        m.apply(&y, &mut zy);
        let (l, r) = (dot(&zx, &y), dot(&x, &zy));
        assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()));
        assert!(dot(&zx, &x) > 0.0);
    }
}

#[test]
fn operators_are_linear() {
    let bs = block_system(8, Domain::UnitSquare, PartitionStrategy::CoarseGrid(2), TraceLayout::PerSubdomain);
    let aug = build_augmented(&bs, 0.6).unwrap();
    let asm = AdditiveSchwarz::from_block_system(&bs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let check = |apply: &dyn Fn(&[f64], &mut [f64]), n: usize, rng: &mut ChaCha8Rng| {
        let (x, y) = (random_vec(rng, n), random_vec(rng, n));
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let comb: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        let (mut fx, mut fy, mut fc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        apply(&x, &mut fx);
        apply(&y, &mut fy);
        apply(&comb, &mut fc);
        let lin: Vec<f64> = fx.iter().zip(&fy).map(|(x, y)| a * x + b * y).collect();
        assert!(max_diff(&lin, &fc) <= 1e-12 * max_abs(&lin).max(1.0));
    };
    for _ in 0..3 {
        check(&|x, y| LinearOperator::apply(&aug, x, y), aug.dim(), &mut rng);
        check(&|x, y| Preconditioner::apply(&aug, x, y), aug.dim(), &mut rng);
        check(&|x, y| asm.apply(x, y), bs.primal.matrix.nrows(), &mut rng);
        check(&|x, y| LinearOperator::apply(&bs.primal.matrix, x, y), bs.primal.matrix.nrows(), &mut rng);
    }
}

#[test]
fn one_subdomain_augmented_gmres_takes_one_step() {
    let bs = block_system(8, Domain::UnitSquare, PartitionStrategy::Boxes(1), TraceLayout::PerSubdomain);
    assert_eq!(bs.n_subdomains(), 1);
    let aug = build_augmented(&bs, 0.5).unwrap();
    assert_eq!(aug.n_ell(), 0);
    assert_eq!(aug.l.nnz(), 0);
    let (w, r) = gmres(&aug, &aug, &aug.g, &vec![0.0; aug.dim()], &cfg(1e-10)).unwrap();
    assert_eq!(r.iterations, 1);
    let u = bs.primal.solve();
    assert!(max_diff(&aug.primal_u(&w), &u) <= 1e-12 * max_abs(&u));
}

#[test]
fn krylov_solutions_match_direct_solves() {
    let tol = 1e-8;
    let bs = block_system(16, Domain::UnitSquare, PartitionStrategy::Boxes(4), TraceLayout::PerSubdomain);
    let a = &bs.primal.matrix;
    let n = a.nrows();
    let u = bs.primal.solve();
    let m = AdditiveSchwarz::from_block_system(&bs).unwrap();
    let (x, r) = pcg(a, &m, &bs.primal.load, &vec![0.0; n], &cfg(tol)).unwrap();
    assert!(r.converged);
    assert!(max_diff(&x, &u) <= 100.0 * tol * max_abs(&u));

    let aug = build_augmented(&bs, 0.7).unwrap();
    let w0 = aug.initial_w(&bs, InitialGuess::Random(5));
    let direct = aug.solve_direct().unwrap();
    for restart in [None, Some(20)] {
        let c = KrylovConfig {
            tol,
            max_iter: 2000,
            restart,
        };
        let (w, r) = gmres(&aug, &aug, &aug.g, &w0, &c).unwrap();
        assert!(r.converged, "restart {restart:?}");
        assert!(max_diff(&w, &direct) <= 100.0 * tol * max_abs(&direct));
        assert!(max_diff(&aug.primal_u(&w), &u) <= 100.0 * tol * max_abs(&u));
    }
}

#[test]
fn pcg_iterations_respect_condition_bound() {
    let tol = 1e-8;
    for (n, parts) in [(8, 2), (8, 4), (16, 2)] {
        let bs = block_system(n, Domain::UnitSquare, PartitionStrategy::Boxes(parts), TraceLayout::PerSubdomain);
        let a = &bs.primal.matrix;
        let dim = a.nrows();
        let m = AdditiveSchwarz::from_block_system(&bs).unwrap();
        // κ(M⁻¹A) from the symmetric form M^{-1/2} A M^{-1/2}
        let minv = probe(&m, dim);
        let minv = (&minv + minv.transpose()) * 0.5;
        let root = minv.symmetric_eigen();
        let half = &root.eigenvectors
            * DMatrix::from_diagonal(&root.eigenvalues.map(f64::sqrt))
            * root.eigenvectors.transpose();
        let ad = DMatrix::from_fn(dim, dim, |r, c| a.get(r, c));
        let pa = &half * ad * &half;
        let ev = ((&pa + pa.transpose()) * 0.5).symmetric_eigenvalues();
        let kappa = ev.max() / ev.min();
        let (_, r) = pcg(a, &m, &bs.primal.load, &vec![0.0; dim], &cfg(tol)).unwrap();
        assert!(r.converged);
        let bound = 3.0 * kappa.sqrt() * (1.0 / tol).ln();
        assert!((r.iterations as f64) <= bound, "{} iterations, kappa {kappa}", r.iterations);
    }
}
