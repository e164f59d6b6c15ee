//! Hamming-weight-constrained QAOA with XY mixers.
//!
//! States are stored directly in the feasible subspace (all bitstrings of a
//! fixed Hamming weight), so every mixer and phase operation is exact in that
//! subspace and no amplitude can leak out of it.

pub mod error;
pub mod instances;
pub mod linalg;
pub mod mixers;
pub mod model;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod qaoa;
pub mod subspace;
pub mod training;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
