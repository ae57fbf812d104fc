//! Small linear algebra layer: compressed-row sparse matrices, dense
//! symmetric kernels, symmetric eigensolvers and sparse direct solvers.

mod dense;
mod direct;
mod eigen;
mod sparse;

pub use dense::{DenseCholesky, DenseMatrix};
pub use direct::{SparseCholesky, SparseLu};
pub use eigen::{
    jacobi_eigenvalues, symmetric_eigenvalues, tridiagonal_bisection_eigenvalues,
    JACOBI_MAX_SIZE, JACOBI_MAX_SWEEPS,
};
pub use sparse::{CsrMatrix, TripletBuilder};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
