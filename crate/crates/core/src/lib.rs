//! Score learned state representations of Lagrangian systems against the
//! true state they were computed from.
//!
//! - [`lagsim`] simulates rollouts under random exploration and reports
//!   temporal-difference statistics.
//! - [`encoders`] holds synthetic encoders with known invertibility.
//! - [`metrics`] estimates mutual information (MINE), kNN entropy, the
//!   smoothness bound and uniqueness score, and a regression probe.
//! - [`nn`] is the small MLP and Adam optimiser both estimators train.
//! - [`cli`] wires everything into the `repmeter` batch tool.

pub mod cli;
pub mod encoders;
pub mod error;
pub mod lagsim;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod table;

pub use error::{Error, Result};
