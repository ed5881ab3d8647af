//! Viscous solver and verification toolkit for gas flow in a variable-area nozzle.
//!
//! The library integrates the one-dimensional isentropic and isothermal flow
//! equations with artificial viscosity on a duct whose cross-section enters as
//! a geometric source term, and certifies the properties the construction is
//! supposed to deliver: time-uniform Riemann-invariant bounds, a strictly
//! positive density floor, viscosity-uniform entropy dissipation, sign
//! preservation for the associated parabolic systems, and Cauchy behaviour of
//! the solution family as the viscosity is refined.
//!
//! Most capabilities are demonstrated by a runnable example under `examples/`;
//! the `nozzleflow` binary exposes the same operations behind a config file.

pub mod cli;
pub mod config;
pub mod entropy;
pub mod error;
pub mod gas;
pub mod geometry;
pub mod maxprinciple;
pub mod monitor;
pub mod quad;
pub mod report;
pub mod solver;
pub mod sweep;

pub use error::Error;

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
