//! Simulator for multi-task mobile edge learning with multiple orchestrators.
//!
//! Models a fleet of wireless edge learners serving several orchestrators,
//! each owning a training task. The library jointly optimizes which learner
//! serves which orchestrator, how the dataset is split, and the integer
//! training schedule (local iterations x global cycles), trading total energy
//! against an analytic learning-quality proxy:
//!
//! - [`model`] — channel gains, rates, per-link time/energy coefficients and
//!   seeded topology generation.
//! - [`learning`] — the convergence bound, its validity conditions, and the
//!   log-linear fit producing the accuracy proxy.
//! - [`mop`] — problem assembly: scalarized objective, feasibility checks,
//!   normalization, and the exhaustive reference solver.
//! - [`copt`] — centralized solver: log-space convexification, chord
//!   underestimators with a closed-form tightness measure, interior-point
//!   subproblem solves and branch-and-bound.
//! - [`heuristics`] — decentralized methods (AAT, FBA, L-FBA) built from
//!   exact association/allocation subproblems and bounded schedule search.
//! - [`harness`] — configuration, seeded Monte Carlo sweeps, Pareto curves,
//!   CSV/JSON export and SVG charts.
//!
//! The `melsim` binary exposes the same functionality as subcommands; the
//! `examples/` directory shows one runnable program per capability.

pub mod copt;
pub mod error;
pub mod harness;
pub mod heuristics;
pub mod learning;
pub mod model;
pub mod mop;

pub use error::{Error, Result};
