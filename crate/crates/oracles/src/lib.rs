//! Independent reference computations backing the test suites.
//!
//! Everything here is deliberately built on different machinery than the
//! main crates: expectations are one-dimensional Gaussian quadratures
//! instead of Monte Carlo over chains, and small convex problems are solved
//! by accelerated proximal gradient instead of coordinate sweeps. Tests
//! compare the two routes; this crate must not depend on the main crates.

pub mod fista;
pub mod scalar;

pub use fista::{fista_chain, FistaMode};
pub use scalar::{bracket_r0, saddle_r0, threshold_alpha_r0, ScalarSaddle};
