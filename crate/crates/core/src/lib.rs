//! Walksat on random k-SAT formulas, instrumented.
//!
//! The crate is split along the lines of what gets measured:
//!
//! - [`cnf`]: formulas, assignments, the uniform and binomial random models, DIMACS I/O.
//! - [`walksat`]: the plain Walksat walk with constant-time flips, trajectories and
//!   drift/ring-crossing statistics.
//! - [`landscape`]: exact small-`n` computation of the low-violation set, mists and
//!   the three quasirandomness conditions.
//! - [`analytics`]: closed-form rate functions, density thresholds and bound exponents.
//! - [`harness`]: reproducible experiment sweeps, verification campaigns, plotting.

pub mod analytics;
pub mod cnf;
pub mod error;
pub mod harness;
pub mod landscape;
pub mod rng;
pub mod walksat;

pub use cnf::{Assignment, Clause, Formula, Literal, Model};
pub use error::{Error, Result};
pub use walksat::{RunOutcome, RunStatus, Trajectory, WalksatState};
