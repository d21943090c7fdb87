//! Experiment orchestration behind the `wslab` command line.
//!
//! Every output is a pure function of its configuration and master seed; see
//! [`crate::rng`] for how per-cell and per-trial seeds are derived.

pub mod bounds;
pub mod config;
pub mod drift;
pub mod gen;
pub mod plot;
pub mod sweep;
pub mod verify;

pub use config::{Cell, ExperimentConfig, OmegaPolicy};
pub use sweep::{run_sweep, ExperimentRow};
