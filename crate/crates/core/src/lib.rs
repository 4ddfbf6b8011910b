//! Gram-Schmidt walk for vector balancing, with the tools to check its
//! analysis numerically.
//!
//! The walk ([`walk`]) colors the columns of a matrix with norm-bounded
//! columns by signs. [`ortho`] rebuilds the orthogonal decomposition of a
//! finished run, including the per-run variance proxy `Z_v` and the count of
//! nontrivial steps `T̂`. [`enumeration`] expands every branch of the walk on
//! small instances, so expectations become exact finite sums. [`harness`]
//! samples the walk at scale, [`inequalities`] certifies the scalar
//! inequalities behind the bound, and [`smoothed`] covers Gaussian
//! perturbations of the matrix.

pub mod cli;
pub mod enumeration;
pub mod error;
pub mod harness;
pub mod inequalities;
pub mod instance;
pub mod linalg;
pub mod ortho;
pub mod quadrature;
pub mod rng;
pub mod smoothed;
pub mod walk;

pub use error::{GswError, Result};
pub use instance::{generate_instance, Instance, InstanceKind};
pub use ortho::OrthoTrace;
pub use walk::{run_walk, WalkTrace};
