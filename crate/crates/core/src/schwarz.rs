//! Block Jacobi, classical and optimized Schwarz on two subdomains, the
//! multi-subdomain optimized Schwarz method and its augmented `(K, L, g)`
//! form.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::dg_space::{edge_mass, TraceLayout};
use crate::error::{invalid, Result};
use crate::linalg::{CsrMatrix, DenseCholesky, DenseMatrix, SparseCholesky, SparseLu, TripletBuilder};
use crate::report::SolveReport;
use crate::schur::{dense_b, schur_rhs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Classical,
    Optimized,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    /// `‖u⁽ⁿ⁾ - u_h‖_0 / ‖f‖_0`
    L2OfU,
    /// `(Σ_i ‖λ_i⁽ⁿ⁾ - λ_h‖²_{∂Ω_i∩Γ})^{1/2} / ‖f‖_0`
    TraceL2,
}

/// Initial traces `λ_i⁰`; the initial `u_i⁰` is always the local solution
/// driven by `λ_i⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// Uniform in `[-1, 1]`, drawn subdomain by subdomain from a seeded
    /// ChaCha8 stream.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct SchwarzConfig {
    pub variant: Variant,
    pub p_hat: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub error_norm: ErrorNorm,
    pub initial: InitialGuess,
    /// Keep every global iterate in the report.
    pub record_iterates: bool,
}

impl Default for SchwarzConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Classical,
            p_hat: 0.0,
            gamma: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            error_norm: ErrorNorm::L2OfU,
            initial: InitialGuess::Random(0),
            record_iterates: false,
        }
    }
}

impl SchwarzConfig {
    pub fn classical() -> Self {
        Self::default()
    }

    pub fn optimized(p_hat: f64) -> Self {
        Self {
            variant: Variant::Optimized,
            p_hat,
            ..Self::default()
        }
    }

    pub fn multi(p_hat: f64) -> Self {
        Self {
            variant: Variant::Multi,
            p_hat,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_hat) {
            return invalid(format!("p_hat must lie in [0, 1), got {}", self.p_hat));
        }
        if self.variant == Variant::Classical && self.p_hat != 0.0 {
            return invalid("classical Schwarz uses p_hat = 0");
        }
        if !(self.tol > 0.0) || !(self.gamma > 0.0) {
            return invalid("tolerance and gamma must be positive");
        }
        Ok(())
    }
}

/// `p̂ = (1 - (h/α)^γ) / (1 + (h/α)^γ)`
pub fn phat_default(h: f64, alpha: f64, gamma: f64) -> Result<f64> {
    if !(h > 0.0 && alpha > 0.0 && gamma > 0.0) {
        return invalid(format!(
            "p_hat ansatz needs positive h, alpha and gamma, got ({h}, {alpha}, {gamma})"
        ));
    }
    let r = (h / alpha).powf(gamma);
    Ok((1.0 - r) / (1.0 + r))
}

/// Initial traces per subdomain, in local numbering.
pub fn initial_traces(bs: &BlockSystem, init: InitialGuess) -> Vec<Vec<f64>> {
    match init {
        InitialGuess::Zero => bs.subdomains.iter().map(|s| vec![0.0; s.n_lambda()]).collect(),
        InitialGuess::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            bs.subdomains
                .iter()
                .map(|s| (0..s.n_lambda()).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect()
        }
    }
}

/// `u_i = Ã_i⁻¹ (f_i - Ã_{iΓ} λ_i)`
pub fn local_solution(bs: &BlockSystem, i: usize, lambda: &[f64]) -> Vec<f64> {
    let sub = &bs.subdomains[i];
    let c = sub.a_ig.mul_vec(lambda);
    let mut rhs: Vec<f64> = sub.f.iter().zip(&c).map(|(f, c)| f - c).collect();
    sub.factor.solve_in_place(&mut rhs);
    rhs
}

fn assemble_global(bs: &BlockSystem, locals: &[Vec<f64>]) -> Vec<f64> {
    let mut u = vec![0.0; bs.space.n_dofs()];
    for (i, ui) in locals.iter().enumerate() {
        bs.scatter(i, ui, &mut u);
    }
    u
}

/// Direct solutions used to measure iteration errors.
struct Reference {
    u: Vec<f64>,
    /// single-copy trace of the hybrid solution, when needed
    lambda: Option<Vec<f64>>,
    scale: f64,
}

impl Reference {
    fn new(bs: &BlockSystem, norm: ErrorNorm) -> Result<Self> {
        let u = bs.primal.solve();
        let lambda = match norm {
            ErrorNorm::L2OfU => None,
            ErrorNorm::TraceL2 => {
                let h = bs.hybrid_matrix();
                let sol = SparseCholesky::new(&h, "hybrid system")?.solve(&bs.hybrid_load());
                Some(sol[bs.space.n_dofs()..].to_vec())
            }
        };
        let scale = if bs.source_norm > 0.0 { bs.source_norm } else { 1.0 };
        Ok(Self { u, lambda, scale })
    }

    fn error(&self, bs: &BlockSystem, u: &[f64], lambdas: &[Vec<f64>]) -> f64 {
        match &self.lambda {
            None => {
                let d: Vec<f64> = u.iter().zip(&self.u).map(|(a, b)| a - b).collect();
                bs.space.l2_norm_sq(&d).unwrap_or(f64::NAN).sqrt() / self.scale
            }
            Some(lh) => {
                let mesh = bs.mesh();
                let part = bs.partition();
                let mut s = 0.0;
                for (i, li) in lambdas.iter().enumerate() {
                    for (k, &e) in part.interface_edges(i).iter().enumerate() {
                        let d0 = li[2 * k] - lh[bs.shared_trace_dof(i, 2 * k)];
                        let d1 = li[2 * k + 1] - lh[bs.shared_trace_dof(i, 2 * k + 1)];
                        s += edge_mass(mesh.edge_length(e), d0, d1);
                    }
                }
                s.sqrt() / self.scale
            }
        }
    }
}

#[derive(Debug, Clone)]
struct State {
    u: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
}

fn drive(
    bs: &BlockSystem,
    cfg: &SchwarzConfig,
    name: &str,
    state0: State,
    mut step: impl FnMut(&State) -> Result<State>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let reference = Reference::new(bs, cfg.error_norm)?;
    let mut report = SolveReport::new(name);
    let mut state = state0;
    let observe = |state: &State, report: &mut SolveReport| {
        let u = assemble_global(bs, &state.u);
        let err = reference.error(bs, &u, &state.lambda);
        report.record(err);
        if cfg.record_iterates {
            report.iterates.push(u);
        }
        err
    };
    let e0 = observe(&state, &mut report);
    if e0 <= cfg.tol {
        report.converged = true;
    } else {
        for n in 1..=cfg.max_iter {
            state = step(&state)?;
            let err = observe(&state, &mut report);
            report.iterations = n;
            if err <= cfg.tol {
                report.converged = true;
                break;
            }
            if !err.is_finite() || report.diverged {
                report.diverged = true;
                break;
            }
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

fn consistent_state(bs: &BlockSystem, lambda: Vec<Vec<f64>>) -> State {
    let u = lambda
        .iter()
        .enumerate()
        .map(|(i, l)| local_solution(bs, i, l))
        .collect();
    State { u, lambda }
}

// ---------------------------------------------------------------------------
// two subdomains

/// Dense `B̃_1`, `B̃_2`, `Ã_Γ` and `g_Γ` for a two-subdomain, single-copy
/// block system. With two subdomains the local and shared trace numberings
/// coincide.
#[derive(Debug, Clone)]
pub struct TwoSubdomainOperators {
    pub b: [DenseMatrix; 2],
    pub a_gamma: DenseMatrix,
    pub g: Vec<f64>,
}

impl TwoSubdomainOperators {
    pub fn new(bs: &BlockSystem) -> Result<Self> {
        if bs.n_subdomains() != 2 {
            return invalid(format!(
                "two-subdomain algorithms need 2 subdomains, got {}",
                bs.n_subdomains()
            ));
        }
        if bs.trace.layout() != TraceLayout::SingleCopy {
            return invalid("two-subdomain algorithms need the single-copy trace layout");
        }
        let b0 = dense_b(bs, 0)?.matrix;
        let b1 = dense_b(bs, 1)?.matrix;
        Ok(Self {
            b: [b0, b1],
            a_gamma: bs.a_gamma.to_dense(),
            g: schur_rhs(bs),
        })
    }
}

fn random_or_zero_two(bs: &BlockSystem, cfg: &SchwarzConfig) -> State {
    consistent_state(bs, initial_traces(bs, cfg.initial))
}

/// Algorithm with `(Ã_Γ - B̃_i) λ_i⁽ⁿ⁾ = B̃_j λ_j⁽ⁿ⁻¹⁾ + g_Γ`.
pub fn classical_schwarz(bs: &BlockSystem, ops: &TwoSubdomainOperators, cfg: &SchwarzConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if cfg.p_hat != 0.0 {
        return invalid("classical Schwarz uses p_hat = 0");
    }
    let lhs = [
        DenseCholesky::new(&ops.a_gamma.add_scaled(-1.0, &ops.b[0]))?,
        DenseCholesky::new(&ops.a_gamma.add_scaled(-1.0, &ops.b[1]))?,
    ];
    let state0 = random_or_zero_two(bs, cfg);
    drive(bs, cfg, "classical-schwarz", state0, |s| {
        let lambda: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let j = 1 - i;
                let mut r = ops.b[j].matvec(&s.lambda[j]);
                r.iter_mut().zip(&ops.g).for_each(|(r, g)| *r += g);
                lhs[i].solve_in_place(&mut r);
                r
            })
            .collect();
        Ok(consistent_state(bs, lambda))
    })
}

/// Algorithm with
/// `(Ã_Γ - (1+p̂)B̃_i) λ_i⁽ⁿ⁾ = -(p̂Ã_Γ - (1+p̂)B̃_j) λ_j⁽ⁿ⁻¹⁾ + (1+p̂) g_Γ`.
pub fn optimized_schwarz(bs: &BlockSystem, ops: &TwoSubdomainOperators, cfg: &SchwarzConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let p = cfg.p_hat;
    let lhs = [
        DenseCholesky::new(&ops.a_gamma.add_scaled(-(1.0 + p), &ops.b[0]))?,
        DenseCholesky::new(&ops.a_gamma.add_scaled(-(1.0 + p), &ops.b[1]))?,
    ];
    let rhs_ops = [
        ops.a_gamma.scaled(p).add_scaled(-(1.0 + p), &ops.b[0]),
        ops.a_gamma.scaled(p).add_scaled(-(1.0 + p), &ops.b[1]),
    ];
    let state0 = random_or_zero_two(bs, cfg);
    drive(bs, cfg, "optimized-schwarz", state0, |s| {
        let lambda: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let j = 1 - i;
                let mut r = rhs_ops[j].matvec(&s.lambda[j]);
                r.iter_mut()
                    .zip(&ops.g)
                    .for_each(|(r, g)| *r = -*r + (1.0 + p) * g);
                lhs[i].solve_in_place(&mut r);
                r
            })
            .collect();
        Ok(consistent_state(bs, lambda))
    })
}

/// `M u⁽ⁿ⁺¹⁾ = N u⁽ⁿ⁾ + f` with `M` the subdomain diagonal blocks of the
/// primal matrix. The initial iterate is the local solution driven by the
/// configured initial traces.
pub fn block_jacobi(bs: &BlockSystem, cfg: &SchwarzConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let a = &bs.primal.matrix;
    let blocks: Vec<SparseCholesky> = bs
        .subdomains
        .iter()
        .enumerate()
        .map(|(i, s)| {
            SparseCholesky::new(
                &a.submatrix(&s.global_dofs, &s.global_dofs),
                &format!("primal block {i}"),
            )
        })
        .collect::<Result<_>>()?;
    let state0 = random_or_zero_two(bs, cfg);
    let f = &bs.primal.load;
    drive(bs, cfg, "block-jacobi", state0, |s| {
        let u = assemble_global(bs, &s.u);
        let au = a.mul_vec(&u);
        let u_new = blocks
            .par_iter()
            .enumerate()
            .map(|(i, m)| {
                let sub = &bs.subdomains[i];
                let mut r: Vec<f64> = sub.global_dofs.iter().map(|&g| f[g] - au[g]).collect();
                m.solve_in_place(&mut r);
                r.iter_mut().zip(&s.u[i]).for_each(|(r, u)| *r += u);
                r
            })
            .collect();
        Ok(State {
            u: u_new,
            lambda: s.lambda.clone(),
        })
    })
}

// ---------------------------------------------------------------------------
// many subdomains

/// Local coupled blocks `K_i = [[Ã_i, Ã_{iΓ}], [Ã_{Γi}, Ã_{Γ,i}/(1+p̂)]]`,
/// factorized once, and the trace DOF pairing across each `Γ_ij`.
#[derive(Debug, Clone)]
pub struct MultiSchwarz {
    p_hat: f64,
    factors: Vec<SparseCholesky>,
    /// `(j, d')` for every local trace DOF `d` of subdomain `i`
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl MultiSchwarz {
    pub fn new(bs: &BlockSystem, p_hat: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p_hat) {
            return invalid(format!("p_hat must lie in [0, 1), got {p_hat}"));
        }
        if bs.trace.layout() != TraceLayout::PerSubdomain {
            return invalid("multi-subdomain Schwarz needs the per-subdomain trace layout");
        }
        let factors = bs
            .subdomains
            .par_iter()
            .enumerate()
            .map(|(i, _)| SparseCholesky::new(&local_block(bs, i, p_hat), &format!("coupled block {i}")))
            .collect::<Result<Vec<_>>>()?;
        let part = bs.partition();
        let neighbors = (0..bs.n_subdomains())
            .map(|i| {
                let mut nb = Vec::with_capacity(bs.trace.n_local(i));
                for &e in part.interface_edges(i) {
                    let (a, b) = part.interface_pair(e).expect("interface edge");
                    let j = if a == i { b } else { a };
                    let d = bs.trace.local_edge_dofs(j, e).expect("shared edge");
                    nb.push((j, d[0]));
                    nb.push((j, d[1]));
                }
                nb
            })
            .collect();
        Ok(Self {
            p_hat,
            factors,
            neighbors,
        })
    }

    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    /// Solves `K_i (u_i, λ_i) = rhs` in place; `rhs` is `[u-part; λ-part]`.
    pub fn solve_local(&self, i: usize, rhs: &mut [f64]) {
        self.factors[i].solve_in_place(rhs);
    }

    /// `t_j = Ã_{Γj} u_j + p̂/(1+p̂) Ã_{Γ,j} λ_j`, the neighbor data sent
    /// across the interface.
    fn outgoing(&self, bs: &BlockSystem, j: usize, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let sub = &bs.subdomains[j];
        let w = self.p_hat / (1.0 + self.p_hat);
        let mut t = sub.a_gi.mul_vec(u);
        let m = sub.a_gamma.mul_vec(lambda);
        t.iter_mut().zip(&m).for_each(|(t, m)| *t += w * m);
        t
    }

    fn step(&self, bs: &BlockSystem, s: &State) -> State {
        let out: Vec<Vec<f64>> = (0..bs.n_subdomains())
            .into_par_iter()
            .map(|j| self.outgoing(bs, j, &s.u[j], &s.lambda[j]))
            .collect();
        let solved: Vec<(Vec<f64>, Vec<f64>)> = (0..bs.n_subdomains())
            .into_par_iter()
            .map(|i| {
                let sub = &bs.subdomains[i];
                let mut rhs = sub.f.clone();
                rhs.extend(self.neighbors[i].iter().map(|&(j, d)| -out[j][d]));
                self.solve_local(i, &mut rhs);
                let lam = rhs.split_off(sub.n_u());
                (rhs, lam)
            })
            .collect();
        let (u, lambda) = solved.into_iter().unzip();
        State { u, lambda }
    }
}

fn local_block(bs: &BlockSystem, i: usize, p_hat: f64) -> CsrMatrix {
    let sub = &bs.subdomains[i];
    let (nu, nl) = (sub.n_u(), sub.n_lambda());
    let mut t = TripletBuilder::new(nu + nl, nu + nl);
    for (r, c, v) in sub.a.iter() {
        t.push(r, c, v);
    }
    for (r, c, v) in sub.a_ig.iter() {
        t.push(r, nu + c, v);
        t.push(nu + c, r, v);
    }
    for (r, c, v) in sub.a_gamma.iter() {
        t.push(nu + r, nu + c, v / (1.0 + p_hat));
    }
    t.build()
}

/// Parallel (Jacobi-type) optimized Schwarz with one trace copy per
/// subdomain.
pub fn multi_schwarz(bs: &BlockSystem, cfg: &SchwarzConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let ms = MultiSchwarz::new(bs, cfg.p_hat)?;
    run_multi(bs, &ms, cfg)
}

pub fn run_multi(bs: &BlockSystem, ms: &MultiSchwarz, cfg: &SchwarzConfig) -> Result<SolveReport> {
    let state0 = consistent_state(bs, initial_traces(bs, cfg.initial));
    drive(bs, cfg, "multi-schwarz", state0, |s| Ok(ms.step(bs, s)))
}

// ---------------------------------------------------------------------------
// augmented system

/// `K w⁽ⁿ⁾ = L w⁽ⁿ⁻¹⁾ + g` with `w = (u_1, …, u_N, λ_1, …, λ_N)`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub k: CsrMatrix,
    pub l: CsrMatrix,
    pub g: Vec<f64>,
    pub p_hat: f64,
    u_offsets: Vec<usize>,
    l_offsets: Vec<usize>,
    global_dofs: Vec<Vec<usize>>,
    neighbors: Vec<Vec<(usize, usize)>>,
    n_primal: usize,
    local: MultiSchwarz,
}

pub fn build_augmented(bs: &BlockSystem, p_hat: f64) -> Result<AugmentedSystem> {
    let local = MultiSchwarz::new(bs, p_hat)?;
    let ns = bs.n_subdomains();
    let mut u_offsets = vec![0];
    let mut l_offsets = vec![0];
    for s in &bs.subdomains {
        u_offsets.push(u_offsets.last().unwrap() + s.n_u());
        l_offsets.push(l_offsets.last().unwrap() + s.n_lambda());
    }
    let nu = u_offsets[ns];
    let n = nu + l_offsets[ns];
    let lu = |i: usize, r: usize| u_offsets[i] + r;
    let ll = |i: usize, d: usize| nu + l_offsets[i] + d;

    let mut tk = TripletBuilder::new(n, n);
    let mut tl = TripletBuilder::new(n, n);
    let w = p_hat / (1.0 + p_hat);
    let mut g = vec![0.0; n];
    for (i, sub) in bs.subdomains.iter().enumerate() {
        for (r, c, v) in sub.a.iter() {
            tk.push(lu(i, r), lu(i, c), v);
        }
        for (r, c, v) in sub.a_ig.iter() {
            tk.push(lu(i, r), ll(i, c), v);
            tk.push(ll(i, c), lu(i, r), v);
        }
        for (r, c, v) in sub.a_gamma.iter() {
            tk.push(ll(i, r), ll(i, c), v / (1.0 + p_hat));
        }
        g[u_offsets[i]..u_offsets[i + 1]].copy_from_slice(&sub.f);
    }
    // row (i, d) of L receives -t_j(d') where d' pairs with d on Γ_ij
    for i in 0..ns {
        for (d, &(j, dj)) in local.neighbors[i].iter().enumerate() {
            let sj = &bs.subdomains[j];
            for (c, v) in sj.a_gi.row(dj) {
                tl.push(ll(i, d), lu(j, c), -v);
            }
            for (c, v) in sj.a_gamma.row(dj) {
                tl.push(ll(i, d), ll(j, c), -w * v);
            }
        }
    }
    Ok(AugmentedSystem {
        k: tk.build(),
        l: tl.build(),
        g,
        p_hat,
        u_offsets,
        l_offsets,
        global_dofs: bs.subdomains.iter().map(|s| s.global_dofs.clone()).collect(),
        neighbors: local.neighbors.clone(),
        n_primal: bs.space.n_dofs(),
        local,
    })
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn n_subdomains(&self) -> usize {
        self.u_offsets.len() - 1
    }

    /// Number of `u` DOFs.
    pub fn n_u(&self) -> usize {
        *self.u_offsets.last().unwrap()
    }

    /// Number of `ℓ` DOFs.
    pub fn n_ell(&self) -> usize {
        *self.l_offsets.last().unwrap()
    }

    /// `(K - L) x`
    pub fn apply_k_minus_l(&self, x: &[f64], y: &mut [f64]) {
        self.k.matvec(x, y);
        let lx = self.l.mul_vec(x);
        y.iter_mut().zip(&lx).for_each(|(y, l)| *y -= l);
    }

    /// `K⁻¹ r` by independent solves of the coupled subdomain blocks.
    pub fn apply_k_inverse(&self, r: &[f64], z: &mut [f64]) {
        let nu = self.n_u();
        let parts: Vec<Vec<f64>> = (0..self.n_subdomains())
            .into_par_iter()
            .map(|i| {
                let (u0, u1) = (self.u_offsets[i], self.u_offsets[i + 1]);
                let (l0, l1) = (nu + self.l_offsets[i], nu + self.l_offsets[i + 1]);
                let mut rhs = r[u0..u1].to_vec();
                rhs.extend_from_slice(&r[l0..l1]);
                self.local.solve_local(i, &mut rhs);
                rhs
            })
            .collect();
        for (i, p) in parts.into_iter().enumerate() {
            let (u0, u1) = (self.u_offsets[i], self.u_offsets[i + 1]);
            let (l0, l1) = (nu + self.l_offsets[i], nu + self.l_offsets[i + 1]);
            z[u0..u1].copy_from_slice(&p[..u1 - u0]);
            z[l0..l1].copy_from_slice(&p[u1 - u0..]);
        }
    }

    /// `w⁰` from per-subdomain initial traces with consistent local
    /// solutions.
    pub fn initial_w(&self, bs: &BlockSystem, init: InitialGuess) -> Vec<f64> {
        let state = consistent_state(bs, initial_traces(bs, init));
        let mut w = vec![0.0; self.dim()];
        let nu = self.n_u();
        for i in 0..self.n_subdomains() {
            w[self.u_offsets[i]..self.u_offsets[i + 1]].copy_from_slice(&state.u[i]);
            w[nu + self.l_offsets[i]..nu + self.l_offsets[i + 1]].copy_from_slice(&state.lambda[i]);
        }
        w
    }

    /// `n` stationary steps with a global sparse factorization of `K`.
    /// Returns `w⁰, …, wⁿ`.
    pub fn stationary_iterates(&self, w0: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
        let kf = SparseCholesky::new(&self.k, "augmented K")?;
        let mut out = vec![w0.to_vec()];
        for _ in 0..n {
            let prev = out.last().unwrap();
            let mut r = self.l.mul_vec(prev);
            r.iter_mut().zip(&self.g).for_each(|(r, g)| *r += g);
            kf.solve_in_place(&mut r);
            out.push(r);
        }
        Ok(out)
    }

    /// Direct sparse LU solve of `(K - L) w = g`.
    pub fn solve_direct(&self) -> Result<Vec<f64>> {
        let mut t = TripletBuilder::new(self.dim(), self.dim());
        for (r, c, v) in self.k.iter() {
            t.push(r, c, v);
        }
        for (r, c, v) in self.l.iter() {
            t.push(r, c, -v);
        }
        Ok(SparseLu::new(&t.build(), "augmented K - L")?.solve(&self.g))
    }

    /// The `u` part of `w` in global primal numbering.
    pub fn primal_u(&self, w: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_primal];
        for (i, dofs) in self.global_dofs.iter().enumerate() {
            for (r, &gd) in dofs.iter().enumerate() {
                u[gd] = w[self.u_offsets[i] + r];
            }
        }
        u
    }

    /// `λ_i` of `w`, local numbering.
    pub fn lambda(&self, w: &[f64], i: usize) -> Vec<f64> {
        let nu = self.n_u();
        w[nu + self.l_offsets[i]..nu + self.l_offsets[i + 1]].to_vec()
    }

    /// `max |λ_i - λ_j|` over all paired trace DOFs.
    pub fn lambda_jump(&self, w: &[f64]) -> f64 {
        let nu = self.n_u();
        let mut m = 0.0_f64;
        for (i, nb) in self.neighbors.iter().enumerate() {
            for (d, &(j, dj)) in nb.iter().enumerate() {
                let a = w[nu + self.l_offsets[i] + d];
                let b = w[nu + self.l_offsets[j] + dj];
                m = m.max((a - b).abs());
            }
        }
        m
    }
}
