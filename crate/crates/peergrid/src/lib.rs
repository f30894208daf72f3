//! Solver and simulation harness for a linear-quadratic network game of
//! electricity consumption with peer comparisons: Nash equilibria, pricing
//! schemes under four information regimes, welfare-restoring subsidies,
//! comparative-statics diagnostics, treated-subset selection, and a
//! deterministic Monte Carlo study runner.

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod net;
pub mod pricing;
pub mod selection;

pub use error::{Error, Result};
