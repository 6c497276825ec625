//! Discrete and sampled-smooth indefinite affine spheres.
//!
//! Surfaces are built from pairs of plane curves or from normalized
//! potentials (through loop-group factorization), and checked against the
//! defining geometry and the lattice equations of their structure data.

pub mod error;
pub mod lattice;
pub mod birkhoff;
pub mod loop_algebra;
pub mod quadrature;
pub mod improper;
pub mod proper;
pub mod verify;
pub mod gallery;

pub use error::{Error, Result};
