//! Certified lower bounds and nonnegativity certificates for sparse
//! univariate polynomials using small-block semidefinite relaxations.

pub mod certify;
pub mod cones;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod poly;
pub mod relax;
pub mod schur;
pub mod sdpa;
pub mod sdp;
pub mod xray;

pub use error::{Error, Result};
pub use poly::{Interval, SparsePoly};
