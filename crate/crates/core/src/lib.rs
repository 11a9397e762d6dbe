//! Numerical laboratory for thermodynamic formalism on solenoid-like
//! partially hyperbolic attractors over non-uniformly expanding torus maps.

// NaN-rejecting `!(x > 0.0)` guards and coordinate-indexed loops are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod base;
pub mod cli;
pub mod config;
pub mod decomposition;
pub mod equilibrium;
pub mod error;
pub mod report;
pub mod rng;
pub mod solenoid;
pub mod system;
pub mod thermo;
pub mod torus;

pub use error::{Error, Result};
pub use num_complex;
