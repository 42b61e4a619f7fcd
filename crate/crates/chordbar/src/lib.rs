//! Log-det barrier evaluation on chordal sparsity patterns.
//!
//! The central objects are symmetric matrices whose lower-triangular
//! nonzero positions form a filled (chordal) pattern. For such matrices the
//! barrier `f(X) = -log det X`, its gradient, its Hessian, and the matching
//! maps for the conjugate barrier all admit exact recursions that visit one
//! column (or one supernode) at a time, sweeping an elimination tree. This
//! crate implements those recursions:
//!
//! - [`pattern`]: sparsity patterns in compressed-column form and symmetric
//!   matrices stored on them.
//! - [`symbolic`]: elimination trees, postorders, chordality verification,
//!   fill computation, and the index maps shared by all numeric sweeps.
//! - [`chordal`]: supernode partitions and clique trees.
//! - [`multifrontal`]: column-at-a-time Cholesky factorization, projected
//!   inverse, and maximum-determinant completion.
//! - [`hessian`]: application, inversion, and factorization of the barrier
//!   Hessian as operators on pattern-sparse matrices.
//! - [`supernodal`]: block variants of the numeric sweeps that process one
//!   supernode per step.
//! - [`oracle`]: slow dense reference implementations and seeded instance
//!   generators, used by the test suites and the verification CLI.

pub mod chordal;
pub mod dense;
pub mod error;
pub mod hessian;
pub mod multifrontal;
pub mod oracle;
pub mod pattern;
pub mod supernodal;
pub mod symbolic;

pub use error::{Error, NumericError, StructureError};
pub use pattern::{SparseSymMatrix, SparsityPattern};
pub use symbolic::SymbolicAnalysis;
