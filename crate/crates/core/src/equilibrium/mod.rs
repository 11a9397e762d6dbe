//! Equilibrium states through a discretized transfer operator, the
//! geometric pressure curve, Lyapunov exponents and SRB diagnostics.

mod curve;
mod geometric;
mod lyapunov;
mod operator;
mod srb;

pub use curve::*;
pub use geometric::*;
pub use lyapunov::*;
pub use operator::*;
pub use srb::*;
