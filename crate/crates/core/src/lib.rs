//! Koppelman integral kernels on flag manifolds.
//!
//! The crate builds the section `η` defining the diagonal of `X × X`, the
//! kernels `K` and `P` and their weighted versions, and uses them to verify
//! the Koppelman formula, solve `∂̄`-equations and project onto harmonic
//! forms on small instances.

pub mod connection;
pub mod diagonal;
pub mod error;
pub mod exterior;
pub mod flagspace;
pub mod hodge;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod solver;
pub mod weights;

pub mod cli;

pub use error::{Error, Result};
