//! Preconditioned conjugate gradients and left-preconditioned GMRES.

use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::BlockSystem;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2, CsrMatrix, SparseCholesky};
use crate::report::SolveReport;
use crate::schwarz::AugmentedSystem;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

/// `K - L` of the augmented system.
impl LinearOperator for AugmentedSystem {
    fn dim(&self) -> usize {
        AugmentedSystem::dim(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_k_minus_l(x, y);
    }
}

/// One optimized Schwarz sweep as a preconditioner: `z = K⁻¹ r`.
impl Preconditioner for AugmentedSystem {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.apply_k_inverse(r, z);
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Non-overlapping additive Schwarz: exact solves with the subdomain
/// diagonal blocks of the primal matrix.
#[derive(Debug, Clone)]
pub struct AdditiveSchwarz {
    blocks: Vec<(Vec<usize>, SparseCholesky)>,
}

impl AdditiveSchwarz {
    pub fn new(a: &CsrMatrix, dof_sets: &[Vec<usize>]) -> Result<Self> {
        let blocks = dof_sets
            .par_iter()
            .enumerate()
            .map(|(i, dofs)| {
                let f = SparseCholesky::new(&a.submatrix(dofs, dofs), &format!("additive Schwarz block {i}"))?;
                Ok((dofs.clone(), f))
            })
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn from_block_system(bs: &BlockSystem) -> Result<Self> {
        let sets: Vec<Vec<usize>> = bs.subdomains.iter().map(|s| s.global_dofs.clone()).collect();
        Self::new(&bs.primal.matrix, &sets)
    }
}

impl Preconditioner for AdditiveSchwarz {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let parts: Vec<Vec<f64>> = self
            .blocks
            .par_iter()
            .map(|(dofs, f)| {
                let mut b: Vec<f64> = dofs.iter().map(|&d| r[d]).collect();
                f.solve_in_place(&mut b);
                b
            })
            .collect();
        z.iter_mut().for_each(|z| *z = 0.0);
        for ((dofs, _), p) in self.blocks.iter().zip(parts) {
            for (&d, v) in dofs.iter().zip(p) {
                z[d] += v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    /// Relative tolerance on the preconditioned residual.
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length; `None` runs without restarts.
    pub restart: Option<usize>,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            restart: None,
        }
    }
}

fn check_dims(a: &dyn LinearOperator, b: &[f64], x0: &[f64]) -> Result<()> {
    if b.len() != a.dim() || x0.len() != a.dim() {
        return invalid(format!(
            "operator of size {} applied to vectors of size {} and {}",
            a.dim(),
            b.len(),
            x0.len()
        ));
    }
    Ok(())
}

/// Preconditioned CG. The error history holds
/// `sqrt(rᵀM⁻¹r) / sqrt(r₀ᵀM⁻¹r₀)`.
pub fn pcg(
    a: &impl LinearOperator,
    m: &impl Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let start = Instant::now();
    let n = b.len();
    let mut report = SolveReport::new("pcg");
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::Breakdown("preconditioner is not positive definite".into()));
    }
    let rz0 = rz;
    report.record(1.0);
    if rz0 == 0.0 {
        report.converged = true;
        report.errors[0] = 0.0;
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    for k in 1..=cfg.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown(format!("pᵀAp = {pap:e} at iteration {k}")));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if rz_new < 0.0 {
            return Err(Error::Breakdown(format!("rᵀz = {rz_new:e} at iteration {k}")));
        }
        let rel = (rz_new / rz0).sqrt();
        report.record(rel);
        report.iterations = k;
        if rel <= cfg.tol {
            report.converged = true;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

/// Left-preconditioned GMRES with modified Gram-Schmidt (reorthogonalized
/// when cancellation is detected) and Givens rotations. The error history
/// holds `‖M⁻¹(b - Ax)‖ / ‖M⁻¹(b - Ax₀)‖`.
pub fn gmres(
    a: &impl LinearOperator,
    m: &impl Preconditioner,
    b: &[f64],
    x0: &[f64],
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let start = Instant::now();
    let n = b.len();
    let restart = cfg.restart.unwrap_or(cfg.max_iter).max(1);
    let mut report = SolveReport::new("gmres");
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; n];

    let precond_residual = |x: &[f64], tmp: &mut Vec<f64>| {
        a.apply(x, tmp);
        let r: Vec<f64> = b.iter().zip(tmp.iter()).map(|(b, ax)| b - ax).collect();
        let mut z = vec![0.0; n];
        m.apply(&r, &mut z);
        z
    };

    let mut z = precond_residual(&x, &mut tmp);
    let beta0 = norm2(&z);
    report.record(1.0);
    if beta0 == 0.0 {
        report.errors[0] = 0.0;
        report.converged = true;
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }

    let mut total = 0;
    'outer: while total < cfg.max_iter {
        let beta = norm2(&z);
        let mut v: Vec<Vec<f64>> = vec![z.iter().map(|z| z / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new(); // column j has j + 2 entries
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut s = vec![beta];
        let mut w = vec![0.0; n];
        let mut steps = 0;
        let mut done = false;
        while steps < restart && total < cfg.max_iter {
            let j = steps;
            a.apply(&v[j], &mut tmp);
            m.apply(&tmp, &mut w);
            let wnorm0 = norm2(&w);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let c = dot(&w, vi);
                col[i] = c;
                w.iter_mut().zip(vi).for_each(|(w, v)| *w -= c * v);
            }
            if norm2(&w) < 1e-8 * wnorm0.max(f64::MIN_POSITIVE) || cancellation(&v, &w) > 1e-8 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    col[i] += c;
                    w.iter_mut().zip(vi).for_each(|(w, v)| *w -= c * v);
                }
            }
            let hn = norm2(&w);
            col[j + 1] = hn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, sg) = if d == 0.0 { (1.0, 0.0) } else { (col[j] / d, col[j + 1] / d) };
            cs.push(c);
            sn.push(sg);
            col[j] = d;
            col[j + 1] = 0.0;
            s.push(-sg * s[j]);
            s[j] *= c;
            h.push(col);
            steps += 1;
            total += 1;
            let rel = s[j + 1].abs() / beta0;
            report.record(rel);
            report.iterations = total;
            if rel <= cfg.tol || hn <= f64::EPSILON * wnorm0 {
                done = true;
                break;
            }
            v.push(w.iter().map(|w| w / hn).collect());
        }
        // back substitution for y, x += V y
        let k = steps;
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = s[i];
            for l in i + 1..k {
                acc -= h[l][i] * y[l];
            }
            if h[i][i] == 0.0 {
                return Err(Error::Breakdown("singular Hessenberg matrix".into()));
            }
            y[i] = acc / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            x.iter_mut().zip(vi).for_each(|(x, v)| *x += yi * v);
        }
        z = precond_residual(&x, &mut tmp);
        let true_rel = norm2(&z) / beta0;
        if done {
            report.converged = true_rel <= 10.0 * cfg.tol.max(f64::EPSILON);
            if let Some(last) = report.errors.last_mut() {
                *last = true_rel;
            }
            break 'outer;
        }
        if true_rel <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

/// Largest |cos| between `w` and the current basis, relative to `‖w‖`.
fn cancellation(v: &[Vec<f64>], w: &[f64]) -> f64 {
    let wn = norm2(w);
    if wn == 0.0 {
        return 0.0;
    }
    v.iter().map(|vi| dot(vi, w).abs() / wn).fold(0.0, f64::max)
}
