//! Representation-quality estimators.

mod dpi;
mod knn;
mod mine;
mod oracle;
mod probe;
mod report;
mod smoothness;

pub use dpi::{dpi_check, DpiConfig, DpiReport};
pub use knn::{knn_entropy, kth_neighbor_distances, KdTree};
pub use mine::{mine_mi, MineConfig, MineEstimate};
use nalgebra::DMatrix;
pub use oracle::{correlated_pair_mi, gaussian_channel_mi, gaussian_entropy, gaussian_mi_oracle};
pub use probe::{regression_probe, ProbeConfig, ProbeResult};
pub use report::{
    evaluate, pair_samples, EvaluationConfig, Metric, MetricFailure, MetricReport, SeededValue, REPORT_SCHEMA_VERSION,
};
pub use smoothness::{
    alpha_from_differences, bound_from_mean_sq_step, estimate_alpha, mean_log_abs_det, smoothness_bound,
    smoothness_ratio_histogram, smoothness_ratios, temporal_distance_profile, uniqueness_score, AlphaEstimate,
    ProfilePoint, RatioHistogram, SmoothnessBound, UniquenessScore, MIN_STEP_NORM,
};

use crate::error::{Error, Result};

/// Row-aligned latent (`S×d_z`) and true-state (`S×2k`) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    latent: DMatrix<f64>,
    state: DMatrix<f64>,
}

impl PairedSamples {
    pub fn new(latent: DMatrix<f64>, state: DMatrix<f64>) -> Result<Self> {
        if latent.nrows() != state.nrows() {
            return Err(Error::invalid(format!(
                "{} latent rows but {} true-state rows",
                latent.nrows(),
                state.nrows()
            )));
        }
        if latent.ncols() == 0 || state.ncols() == 0 {
            return Err(Error::invalid("paired samples need at least one column on each side"));
        }
        Ok(Self { latent, state })
    }

    pub fn latent(&self) -> &DMatrix<f64> {
        &self.latent
    }

    pub fn state(&self) -> &DMatrix<f64> {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.latent.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.latent.nrows() == 0
    }

    /// The same pairs with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            latent: self.state.clone(),
            state: self.latent.clone(),
        }
    }
}
