//! Numerical laboratory for the stability of sums of ground states of
//! `Δu - u + |u|^{p-1}u = 0` on `R^d`.

pub mod construction;
pub mod decomposition;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod groundstate;
pub mod interactions;
pub mod ode;
pub mod params;
pub mod quadrature;
pub mod spectral;
pub mod special;
pub mod stats;
pub mod verifier;

pub use error::{Error, Result};
pub use params::ProblemParams;
