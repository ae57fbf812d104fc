use super::DenseMatrix;
use crate::error::{Error, Result};

/// Above this size [`symmetric_eigenvalues`] switches from Jacobi rotations to
/// Householder tridiagonalization followed by Sturm bisection.
pub const JACOBI_MAX_SIZE: usize = 2048;
pub const JACOBI_MAX_SWEEPS: usize = 100;

const JACOBI_TOL: f64 = 1e-12;

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    if a.nrows() <= JACOBI_MAX_SIZE {
        jacobi_eigenvalues(a)
    } else {
        tridiagonal_bisection_eigenvalues(a)
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `1e-12` times the Frobenius norm of the input.
pub fn jacobi_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigenvalues of a non-square matrix".into()));
    }
    let n = a.nrows();
    let mut m = a.clone();
    m.symmetrize();
    let total: f64 = m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let off_norm = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&m) <= JACOBI_TOL * total {
            let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/cols p and q
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
    }
    Err(Error::NoConvergence {
        what: "cyclic jacobi eigensolver".into(),
        iterations: JACOBI_MAX_SWEEPS,
    })
}

/// Householder reduction to tridiagonal form, then all eigenvalues by Sturm
/// sequence bisection.
pub fn tridiagonal_bisection_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("eigenvalues of a non-square matrix".into()));
    }
    let (diag, off) = householder_tridiagonal(a);
    Ok(bisection_all(&diag, &off))
}

/// Returns the diagonal and subdiagonal (`off[0] = 0`, `off[i]` couples
/// `i-1` and `i`).
fn householder_tridiagonal(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| m[i][k].abs()).sum();
            if scale == 0.0 {
                e[i] = m[i][l];
            } else {
                for k in 0..=l {
                    m[i][k] /= scale;
                    h += m[i][k] * m[i][k];
                }
                let f = m[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                m[i][l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += m[j][k] * m[i][k];
                    }
                    for k in (j + 1)..=l {
                        g += m[k][j] * m[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * m[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = m[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        m[j][k] -= f * e[k] + g * m[i][k];
                    }
                }
            }
        } else {
            e[i] = m[i][l];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = m[i][i];
    }
    e[0] = 0.0;
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off2 = if i == 0 { 0.0 } else { e[i] * e[i] };
        q = d[i] - x - if i == 0 { 0.0 } else { off2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisection_all(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 0 {
        return Vec::new();
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = e[i].abs() + if i + 1 < n { e[i + 1].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * span;
    hi += 1e-12 * span;
    let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
    (0..n)
        .map(|k| {
            // smallest x with count(x) > k
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sturm_count(d, e, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.symmetrize();
        a
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        // tridiag(-1, 2, -1): 2 - 2 cos(k pi / (n+1))
        let n = 12;
        let a = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = jacobi_eigenvalues(&a).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
    }

    #[test]
    fn bisection_matches_jacobi() {
        for seed in 0..4 {
            let a = random_symmetric(40, seed);
            let j = jacobi_eigenvalues(&a).unwrap();
            let b = tridiagonal_bisection_eigenvalues(&a).unwrap();
            for (x, y) in j.iter().zip(&b) {
                assert!((x - y).abs() < 1e-11, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn trivial_sizes() {
        assert!(jacobi_eigenvalues(&DenseMatrix::zeros(0, 0)).unwrap().is_empty());
        let one = DenseMatrix::from_fn(1, 1, |_, _| 3.5);
        assert_eq!(jacobi_eigenvalues(&one).unwrap(), vec![3.5]);
        assert_eq!(tridiagonal_bisection_eigenvalues(&one).unwrap().len(), 1);
    }
}
