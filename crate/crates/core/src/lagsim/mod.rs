//! Discrete-time simulation of Lagrangian systems under Gaussian
//! exploration, and the statistics of temporal state differences.
//!
//! Holonomic constraints are assumed already eliminated: models are written
//! in reduced coordinates and no constraint forces are computed.

mod io;
mod sim;
mod stats;
mod system;

pub(crate) use io::{check_format, header_usize};
pub use io::{
    read_trajectory, trajectory_columns, trajectory_from_table, trajectory_to_table, write_trajectory, FORMAT_VERSION,
    TRAJECTORY_FORMAT,
};
pub use sim::{
    euler_step, isotropic_walk, rollout, rollouts, tilde_b, ExplorationPolicy, PolicySpec, State, Trajectory,
    TrajectoryMeta,
};
pub use stats::{
    difference_at, first_difference_stats, input_map_drift, normality_diagnostic, second_difference_stats,
    trajectory_differences, CoordinateMoments, DifferenceOrder, DifferenceStats,
};
pub use system::{SystemModel, SystemSpec};
