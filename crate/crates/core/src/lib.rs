//! Hybridizable interior penalty (IPH) discontinuous Galerkin discretization of
//! `eta*u - div(grad u) = f` on 2D triangulations, together with a
//! non-overlapping domain decomposition solver stack:
//!
//! - block Jacobi on the primal system and its Schur-complement twin
//!   (classical Schwarz with the IPH Robin parameter),
//! - optimized Schwarz with the relaxation parameter `p_hat`,
//! - the multi-subdomain variant, its augmented `(K, L, g)` algebraic form,
//!   and Krylov solvers preconditioned by it.
//!
//! Everything is piecewise linear (`k = 1`) with homogeneous Dirichlet data.

pub mod assembly;
pub mod dg_space;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod report;
pub mod schur;
pub mod schwarz;

pub use assembly::{assemble_hybrid, assemble_primal, BlockSystem, PenaltyField, PrimalSystem};
pub use dg_space::{BrokenP1Space, TraceSpace};
pub use error::{Error, Result};
pub use mesh::{Domain, Partition, PartitionStrategy, TriangleMesh};
pub use report::SolveReport;
