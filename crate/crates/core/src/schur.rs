//! Discrete harmonic extensions, the Robin-trace operators `B̃_i`, the
//! interface Schur complement and the symmetrized operators `C_i`, `D̂_i`.

use std::io::Write;

use rayon::prelude::*;

use crate::assembly::{BlockSystem, SubdomainBlocks};
use crate::dg_space::{edge_mass, side_endpoints, TraceSpace};
use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigenvalues, CsrMatrix, DenseMatrix, TripletBuilder};

/// Refuse to densify interface operators beyond this many trace DOFs.
pub const SCHUR_GUARD: usize = 20000;

const SOLVE_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorLabel {
    B(usize),
    SGamma,
    C(usize),
    D(usize),
    DHat(usize),
}

impl std::fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorLabel::B(i) => write!(f, "B{}", i + 1),
            OperatorLabel::SGamma => write!(f, "S_Gamma"),
            OperatorLabel::C(i) => write!(f, "C_{}", i + 1),
            OperatorLabel::D(i) => write!(f, "D_{}", i + 1),
            OperatorLabel::DHat(i) => write!(f, "D_hat_{}", i + 1),
        }
    }
}

/// Dense symmetric operator on trace DOFs.
#[derive(Debug, Clone)]
pub struct InterfaceOperator {
    pub label: OperatorLabel,
    pub matrix: DenseMatrix,
}

impl InterfaceOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.matrix)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.matrix.cholesky().is_ok()
    }
}

/// `u_i = H_i(φ)`, the local solution with `φ` as weak Dirichlet data.
#[derive(Debug, Clone)]
pub struct HarmonicExtension {
    pub subdomain: usize,
    pub generator: Vec<f64>,
    pub extension: Vec<f64>,
}

impl HarmonicExtension {
    /// `‖Ã_i u_i + Ã_{iΓ} φ‖ / (‖Ã_i u_i‖ + ‖Ã_{iΓ} φ‖)`
    pub fn relative_residual(&self, bs: &BlockSystem) -> f64 {
        let sub = &bs.subdomains[self.subdomain];
        let au = sub.a.mul_vec(&self.extension);
        let cp = sub.a_ig.mul_vec(&self.generator);
        let r: f64 = au.iter().zip(&cp).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        let scale = crate::linalg::norm2(&au) + crate::linalg::norm2(&cp);
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }
}

fn check_trace_len(sub: &SubdomainBlocks, i: usize, phi: &[f64]) -> Result<()> {
    if phi.len() != sub.n_lambda() {
        return invalid(format!(
            "subdomain {i} has {} trace dofs, got a vector of length {}",
            sub.n_lambda(),
            phi.len()
        ));
    }
    Ok(())
}

fn subdomain(bs: &BlockSystem, i: usize) -> Result<&SubdomainBlocks> {
    bs.subdomains
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("no subdomain {i}")))
}

/// `H_i(φ) = -Ã_i⁻¹ Ã_{iΓ} φ` in the local trace numbering of subdomain `i`.
pub fn harmonic_extension(bs: &BlockSystem, i: usize, phi: &[f64]) -> Result<HarmonicExtension> {
    let sub = subdomain(bs, i)?;
    check_trace_len(sub, i, phi)?;
    let mut u = sub.a_ig.mul_vec(phi);
    u.iter_mut().for_each(|v| *v = -*v);
    sub.factor.solve_in_place(&mut u);
    Ok(HarmonicExtension {
        subdomain: i,
        generator: phi.to_vec(),
        extension: u,
    })
}

/// `B̃_i φ` with one subdomain solve.
pub fn apply_b(bs: &BlockSystem, i: usize, phi: &[f64]) -> Result<Vec<f64>> {
    let ext = harmonic_extension(bs, i, phi)?;
    let sub = &bs.subdomains[i];
    let mut out = sub.a_gi.mul_vec(&ext.extension);
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(out)
}

/// Dense `B̃_i` in the local trace numbering, built column block by column
/// block with multi-right-hand-side solves.
pub fn dense_b(bs: &BlockSystem, i: usize) -> Result<InterfaceOperator> {
    let sub = subdomain(bs, i)?;
    let n_l = sub.n_lambda();
    if n_l > SCHUR_GUARD {
        return Err(Error::SizeGuard {
            what: format!("dense B of subdomain {i}"),
            size: n_l,
            limit: SCHUR_GUARD,
        });
    }
    let n_u = sub.n_u();
    let starts: Vec<usize> = (0..n_l).step_by(SOLVE_CHUNK).collect();
    let blocks: Vec<(usize, Vec<f64>)> = starts
        .par_iter()
        .map(|&c0| {
            let m = SOLVE_CHUNK.min(n_l - c0);
            let mut rhs = vec![0.0; n_u * m];
            for j in 0..m {
                // column c0 + j of Ã_iΓ is row c0 + j of its transpose
                for (r, v) in sub.a_gi.row(c0 + j) {
                    rhs[j * n_u + r] = v;
                }
            }
            sub.factor.solve_columns_in_place(&mut rhs, m);
            let mut out = vec![0.0; n_l * m];
            for j in 0..m {
                sub.a_gi.matvec(&rhs[j * n_u..(j + 1) * n_u], &mut out[j * n_l..(j + 1) * n_l]);
            }
            (c0, out)
        })
        .collect();
    let mut b = DenseMatrix::zeros(n_l, n_l);
    for (c0, out) in blocks {
        let m = out.len() / n_l.max(1);
        for j in 0..m {
            b.set_column(c0 + j, &out[j * n_l..(j + 1) * n_l]);
        }
    }
    Ok(InterfaceOperator {
        label: OperatorLabel::B(i),
        matrix: b,
    })
}

/// Dense `B̃_i` lifted to single-copy numbering.
pub fn dense_b_shared(bs: &BlockSystem, i: usize) -> Result<InterfaceOperator> {
    let local = dense_b(bs, i)?;
    let n = bs.n_gamma();
    let map: Vec<usize> = (0..local.dim()).map(|d| bs.shared_trace_dof(i, d)).collect();
    let mut m = DenseMatrix::zeros(n, n);
    for (a, &ga) in map.iter().enumerate() {
        for (b, &gb) in map.iter().enumerate() {
            m[(ga, gb)] += local.matrix[(a, b)];
        }
    }
    Ok(InterfaceOperator {
        label: local.label,
        matrix: m,
    })
}

/// `g_Γ = -Σ_i Ã_{Γi} Ã_i⁻¹ f_i` in single-copy numbering.
pub fn schur_rhs(bs: &BlockSystem) -> Vec<f64> {
    let mut g = vec![0.0; bs.n_gamma()];
    for (i, sub) in bs.subdomains.iter().enumerate() {
        let x = sub.factor.solve(&sub.f);
        let local: Vec<f64> = sub.a_gi.mul_vec(&x).into_iter().map(|v| -v).collect();
        bs.trace_scatter_add(i, &local, &mut g);
    }
    g
}

/// `S̃_Γ = Ã_Γ - Σ B̃_i` (dense) and `g_Γ`, single-copy numbering.
pub fn assemble_schur(bs: &BlockSystem) -> Result<(InterfaceOperator, Vec<f64>)> {
    let n = bs.n_gamma();
    if n > SCHUR_GUARD {
        return Err(Error::SizeGuard {
            what: "interface Schur complement".into(),
            size: n,
            limit: SCHUR_GUARD,
        });
    }
    let mut s = bs.a_gamma.to_dense();
    for i in 0..bs.n_subdomains() {
        let b = dense_b_shared(bs, i)?;
        s = s.add_scaled(-1.0, &b.matrix);
    }
    Ok((
        InterfaceOperator {
            label: OperatorLabel::SGamma,
            matrix: s,
        },
        schur_rhs(bs),
    ))
}

/// Closed-form symmetric square root of an s.p.d. 2×2 matrix:
/// `√M = (M + √det I) / √(tr + 2√det)`.
pub fn sqrt_2x2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    if !(det > 0.0 && tr > 0.0) || (m[0][1] - m[1][0]).abs() > 1e-12 * tr {
        return Err(Error::NotPositiveDefinite {
            what: "interface block".into(),
            hint: format!("2x2 block with trace {tr:e} and determinant {det:e}"),
        });
    }
    let sd = det.sqrt();
    let t = (tr + 2.0 * sd).sqrt();
    Ok([[(m[0][0] + sd) / t, m[0][1] / t], [m[1][0] / t, (m[1][1] + sd) / t]])
}

fn inverse_2x2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// `(Ã_Γ^{1/2}, Ã_Γ^{-1/2})` for a matrix made of 2×2 diagonal blocks on
/// DOF pairs `(2k, 2k+1)`.
pub fn interface_mass_sqrt(a_gamma: &CsrMatrix) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = a_gamma.nrows();
    if n % 2 != 0 || a_gamma.ncols() != n {
        return invalid("interface mass must be square with an even size");
    }
    for (r, c, v) in a_gamma.iter() {
        if r / 2 != c / 2 && v != 0.0 {
            return invalid(format!("interface mass is not 2x2 block diagonal at ({r}, {c})"));
        }
    }
    let mut ts = TripletBuilder::new(n, n);
    let mut ti = TripletBuilder::new(n, n);
    for k in 0..n / 2 {
        let d = [2 * k, 2 * k + 1];
        let m = [
            [a_gamma.get(d[0], d[0]), a_gamma.get(d[0], d[1])],
            [a_gamma.get(d[1], d[0]), a_gamma.get(d[1], d[1])],
        ];
        let s = sqrt_2x2(m)?;
        let si = inverse_2x2(s);
        for p in 0..2 {
            for q in 0..2 {
                ts.push(d[p], d[q], s[p][q]);
                ti.push(d[p], d[q], si[p][q]);
            }
        }
    }
    Ok((ts.build(), ti.build()))
}

/// `X A X` for a block-diagonal (sparse) `X` and dense `A`.
fn congruence(x: &CsrMatrix, a: &DenseMatrix) -> DenseMatrix {
    let xd = x.to_dense();
    let mut out = xd.matmul(a).matmul(&xd);
    out.symmetrize();
    out
}

/// `C_i = Ã_Γ^{-1/2} B̃_i Ã_Γ^{-1/2}` in the local trace numbering of `i`.
pub fn operator_c(bs: &BlockSystem, i: usize) -> Result<InterfaceOperator> {
    let b = dense_b(bs, i)?;
    let (_, inv_sqrt) = interface_mass_sqrt(&bs.subdomains[i].a_gamma)?;
    Ok(InterfaceOperator {
        label: OperatorLabel::C(i),
        matrix: congruence(&inv_sqrt, &b.matrix),
    })
}

/// Ascending spectrum of `C_i`.
pub fn spectrum_c(bs: &BlockSystem, i: usize) -> Result<Vec<f64>> {
    operator_c(bs, i)?.eigenvalues()
}

/// `D̂_i = I - (1 - p̂)(I - (1 + p̂) C_i)⁻¹`, formed densely.
pub fn operator_dhat(bs: &BlockSystem, i: usize, p_hat: f64) -> Result<InterfaceOperator> {
    if !(0.0..1.0).contains(&p_hat) {
        return invalid(format!("p_hat must lie in [0, 1), got {p_hat}"));
    }
    let c = operator_c(bs, i)?;
    let n = c.dim();
    let m = DenseMatrix::identity(n).add_scaled(-(1.0 + p_hat), &c.matrix);
    let inv = m.cholesky()?.inverse();
    let mut d = DenseMatrix::identity(n).add_scaled(-(1.0 - p_hat), &inv);
    d.symmetrize();
    Ok(InterfaceOperator {
        label: OperatorLabel::DHat(i),
        matrix: d,
    })
}

/// Ascending spectrum of `D̂_i`.
pub fn spectrum_dhat(bs: &BlockSystem, i: usize, p_hat: f64) -> Result<Vec<f64>> {
    operator_dhat(bs, i, p_hat)?.eigenvalues()
}

/// Spectral radius of `D̂_i`.
pub fn spectral_radius_dhat(bs: &BlockSystem, i: usize, p_hat: f64) -> Result<f64> {
    let ev = spectrum_dhat(bs, i, p_hat)?;
    Ok(ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// `θ_i(φ)`: local coefficients of subdomain `i` that equal `φ` at the
/// endpoints of every interface edge and vanish at all other nodes. A vertex
/// of an element touched by two interface edges gets the mean of the two
/// edge values.
pub fn extension_by_zero(trace: &TraceSpace, i: usize, phi: &[f64]) -> Result<Vec<f64>> {
    let part = trace.partition();
    if i >= part.n_subdomains() {
        return invalid(format!("no subdomain {i}"));
    }
    if phi.len() != trace.n_local(i) {
        return invalid(format!(
            "subdomain {i} has {} trace dofs, got {}",
            trace.n_local(i),
            phi.len()
        ));
    }
    let mesh = part.mesh();
    let n_u = 3 * part.triangles(i).len();
    let mut sum = vec![0.0; n_u];
    let mut count = vec![0u32; n_u];
    for (k, &e) in part.interface_edges(i).iter().enumerate() {
        let (s1, s2) = mesh.edge_sides(e);
        let side = if part.subdomain_of(s1.triangle) == i { s1 } else { s2.unwrap() };
        let ends = side_endpoints(mesh, e, side);
        let base = 3 * part.local_index(side.triangle);
        for p in 0..2 {
            sum[base + ends[p]] += phi[2 * k + p];
            count[base + ends[p]] += 1;
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect())
}

/// Observed constants of the three extension-by-zero inequalities for one
/// generator: the largest per-element `‖θ‖²_K / (h_K ‖φ‖²_{Γ∩∂K})` and
/// `h_K ‖∇θ‖²_K / ‖φ‖²_{Γ∩∂K}`, and `‖⟦θ⟧‖²_{E_i} / ‖φ‖²_Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionRatios {
    pub mass: f64,
    pub grad: f64,
    pub jump: f64,
}

pub fn extension_by_zero_ratios(trace: &TraceSpace, i: usize, phi: &[f64]) -> Result<ExtensionRatios> {
    let theta = extension_by_zero(trace, i, phi)?;
    let part = trace.partition();
    let mesh = part.mesh();
    let tris = part.triangles(i);
    let local = |t: usize| 3 * part.local_index(t);
    let coeffs = |t: usize| {
        let b = local(t);
        [theta[b], theta[b + 1], theta[b + 2]]
    };

    // ‖φ‖² on the interface edges of each touched element
    let mut phi_on: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut phi_total = 0.0;
    for (k, &e) in part.interface_edges(i).iter().enumerate() {
        let (s1, s2) = mesh.edge_sides(e);
        let side = if part.subdomain_of(s1.triangle) == i { s1 } else { s2.unwrap() };
        let m = edge_mass(mesh.edge_length(e), phi[2 * k], phi[2 * k + 1]);
        *phi_on.entry(side.triangle).or_default() += m;
        phi_total += m;
    }

    let mut mass = 0.0_f64;
    let mut grad = 0.0_f64;
    for (&t, &pe) in &phi_on {
        if pe == 0.0 {
            continue;
        }
        let c = coeffs(t);
        let area = mesh.area(t);
        let s = c[0] + c[1] + c[2];
        let l2 = area / 12.0 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + s * s);
        let geo = crate::dg_space::ElementGeometry::new(mesh.triangle_points(t));
        let g = geo.gradient(c);
        let h = mesh.diameter(t);
        mass = mass.max(l2 / (h * pe));
        grad = grad.max(h * area * (g[0] * g[0] + g[1] * g[1]) / pe);
    }

    // jumps over all edges of subdomain i, its boundary included
    let mut jump = 0.0;
    let mut visited = std::collections::HashSet::new();
    for &t in tris {
        for e in mesh.triangle_edges(t) {
            if !visited.insert(e) {
                continue;
            }
            let (s1, s2) = mesh.edge_sides(e);
            let trace_of = |side: crate::mesh::EdgeSide| {
                let ends = side_endpoints(mesh, e, side);
                let c = coeffs(side.triangle);
                [c[ends[0]], c[ends[1]]]
            };
            let in_i = |side: crate::mesh::EdgeSide| part.subdomain_of(side.triangle) == i;
            let j = match s2 {
                Some(s2) if in_i(s1) && in_i(s2) => {
                    let (a, b) = (trace_of(s1), trace_of(s2));
                    [a[0] - b[0], a[1] - b[1]]
                }
                _ => trace_of(if in_i(s1) { s1 } else { s2.unwrap() }),
            };
            jump += edge_mass(mesh.edge_length(e), j[0], j[1]);
        }
    }
    Ok(ExtensionRatios {
        mass,
        grad,
        jump: if phi_total > 0.0 { jump / phi_total } else { 0.0 },
    })
}

/// One row of the `C_i` spectrum table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub level: usize,
    pub h: f64,
    pub n_gamma: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub const SPECTRA_CSV_HEADER: &str = "level,h,n_gamma,sigma_min,sigma_max";

pub fn write_spectra_csv<W: Write>(rows: &[SpectrumRow], mut w: W) -> Result<()> {
    writeln!(w, "{SPECTRA_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{},{:.16e},{:.16e}",
            r.level, r.h, r.n_gamma, r.sigma_min, r.sigma_max
        )?;
    }
    Ok(())
}
