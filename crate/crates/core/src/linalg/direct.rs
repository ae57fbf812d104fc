use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{MatMut, Side};

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Sparse `L Lᵀ` factorization (fill-reducing ordering chosen by faer).
/// Immutable after construction, so concurrent solves on a shared
/// factorization are allowed.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SparseCholesky {
    /// Factorizes a symmetric matrix. Only the lower triangle is read.
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!("{what}: matrix is not square")));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite {
                what: what.to_string(),
                hint: format!("sparse cholesky failed ({e:?})"),
            })?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        if self.n == 0 {
            return;
        }
        let n = self.n;
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(b, n, 1));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for `ncols` right-hand sides stored column-major in `b`.
    pub fn solve_columns_in_place(&self, b: &mut [f64], ncols: usize) {
        assert_eq!(b.len(), self.n * ncols);
        if self.n == 0 || ncols == 0 {
            return;
        }
        let n = self.n;
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(b, n, ncols));
    }
}

/// Sparse LU with partial pivoting, for the nonsymmetric augmented system.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix, what: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!("{what}: matrix is not square")));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("{what}: sparse LU failed ({e:?})")))?;
        Ok(Self { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        if self.n > 0 {
            let n = self.n;
            self.lu
                .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        }
        x
    }
}
