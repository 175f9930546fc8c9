//! Radial ground states of the Schrödinger-Poisson-Slater equation
//!
//! ```text
//! -Lap u + u + lambda (I_2 * |u|^2) u = |u|^(p-2) u    in R^3,  3 < p < 6
//! ```
//!
//! and the tools to follow them as `lambda -> infinity`, where the rescaled
//! ground states approach the zero-mass equation
//! `-Lap v + (I_2 * |v|^2) v = |v|^(p-2) v`.

pub mod asymptotics;
pub mod cli;
pub mod coulomb;
pub mod error;
pub mod functionals;
pub mod interp;
pub mod io;
mod krylov;
pub mod radial;
pub mod scf;
pub mod solver;
pub mod svg;

pub use error::{Result, SpsError};
pub use functionals::{EnergyBreakdown, ProblemParams};
pub use radial::{make_grid, RadialFunction, RadialGrid};
pub use solver::{ground_state, GridSpec, Init, SolverConfig, Solution};
