//! First-order Gautschi-type exponential wave integrators for the periodic
//! 1D nonlinear Schrodinger equation
//!
//! ```text
//! i d_t psi = -d_xx psi + V(x) psi + f(|psi|^2) psi,   x in (a, b)
//! ```
//!
//! with potentials and nonlinearities of low regularity, together with
//! time-splitting schemes for comparison and a convergence-study harness.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod physics;
pub mod spectral;

pub use error::{Error, Result};
pub use integrators::{evolve, evolve_observed, initial_field, Propagator, Scheme, SchemeConfig, SolverState};
pub use physics::{Nonlinearity, Potential};
pub use spectral::{GridField, PeriodicGrid, SpectralField};
