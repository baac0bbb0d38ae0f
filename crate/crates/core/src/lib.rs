//! Schrödinger–Newton simulation toolkit: Chebyshev spectral grids, Poisson
//! solvers, Crank–Nicolson and ADI time stepping, stationary states and
//! diagnostics in spherical, axisymmetric and planar geometry.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod linalg;
pub mod oracle;
pub mod poisson;
pub mod spectral;
pub mod stationary;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
