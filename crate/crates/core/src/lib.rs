//! Hydrodynamic limit toward a 3-rarefaction wave for the Landau equation.
//!
//! The library covers the Euler Riemann data, smooth approximate waves,
//! a discrete Landau collision operator on a velocity grid, Burnett functions
//! and transport coefficients, a 1-D compressible Navier-Stokes solver and the
//! convergence harness that ties them together.

pub mod burgers;
pub mod burnett;
pub mod conv;
pub mod error;
pub mod euler;
pub mod fluid;
pub mod harness;
pub mod krylov;
pub mod landau;
pub mod numerics;
pub mod velocity;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
