//! Phase-transition analysis of L1-norm reconstruction under
//! Kronecker-correlated compression matrices.
//!
//! The crate has two halves that answer the same question — at which
//! compression rate `alpha = P/N` does equality-constrained L1 minimization
//! stop recovering a sparse signal — by two independent routes:
//!
//! * [`replica`] evaluates the asymptotic (`N -> infinity`) threshold from
//!   the order-parameter fixed-point equations of the correlated ensemble,
//!   with expectations taken by Monte Carlo over one-dimensional chain
//!   minimizations ([`chain`]).
//! * [`recovery`] and [`experiments`] measure the transition directly:
//!   sample finite instances ([`model`]), solve basis pursuit, and
//!   extrapolate per-size thresholds to infinite size.
//!
//! The crate is `no_std`-compatible (requires `alloc`); everything that
//! touches files, threads, or a terminal lives in the companion CLI crate.
//! Parallel Monte Carlo is abstracted behind [`exec::Parallelism`] so the
//! core stays pure while callers may inject a thread pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod chain;
pub mod exec;
pub mod experiments;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod recovery;
pub mod replica;
pub mod rng;

pub use chain::{solve_chain, ChainMode, ChainOptions, ChainProblem, ChainSolution};
pub use model::{CorrelationSpec, KroneckerMatrix, ProblemInstance, SignalPrior};
pub use recovery::{basis_pursuit, basis_pursuit_lp_oracle, BasisPursuitParams, RecoveryResult};
pub use replica::{BisectConfig, IterConfig, McConfig, SaddleState, ThresholdResult};
