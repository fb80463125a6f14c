use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sim::{tilde_b, Trajectory};
use super::system::SystemSpec;
use crate::error::{Error, Result};
use crate::linalg::{column_means, sample_covariance};

/// Temporal difference order: `δ¹ = z_{n+1} − z_n` or
/// `δ² = z_{n+1} − 2 z_n + z_{n−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DifferenceOrder {
    First,
    Second,
}

impl TryFrom<u8> for DifferenceOrder {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(DifferenceOrder::First),
            2 => Ok(DifferenceOrder::Second),
            _ => Err(format!("difference order must be 1 or 2, got {v}")),
        }
    }
}

impl From<DifferenceOrder> for u8 {
    fn from(o: DifferenceOrder) -> u8 {
        match o {
            DifferenceOrder::First => 1,
            DifferenceOrder::Second => 2,
        }
    }
}

/// `δ` at step `n` for a sequence of vectors.
pub fn difference_at(zs: &[DVector<f64>], n: usize, order: DifferenceOrder) -> DVector<f64> {
    match order {
        DifferenceOrder::First => &zs[n + 1] - &zs[n],
        DifferenceOrder::Second => &zs[n + 1] - &zs[n] * 2.0 + &zs[n - 1],
    }
}

/// Every difference of the given order along one trajectory, as rows.
pub fn trajectory_differences(traj: &Trajectory, order: DifferenceOrder) -> DMatrix<f64> {
    let zs: Vec<_> = (0..traj.len()).map(|n| traj.z(n)).collect();
    let first = match order {
        DifferenceOrder::First => 0,
        DifferenceOrder::Second => 1,
    };
    let rows = (traj.len() - 1).saturating_sub(first);
    let d = zs[0].len();
    let mut out = DMatrix::zeros(rows, d);
    for (r, n) in (first..traj.len() - 1).enumerate() {
        out.row_mut(r).copy_from(&difference_at(&zs, n, order).transpose());
    }
    out
}

/// Moments of the state difference at a fixed step across trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub samples: usize,
}

impl DifferenceStats {
    /// Mean of the position block (first `k` coordinates).
    pub fn position_mean(&self) -> DVector<f64> {
        let k = self.mean.len() / 2;
        self.mean.rows(0, k).into_owned()
    }

    pub fn velocity_covariance(&self) -> DMatrix<f64> {
        let k = self.mean.len() / 2;
        self.covariance.view((k, k), (k, k)).into_owned()
    }

    pub fn position_covariance(&self) -> DMatrix<f64> {
        let k = self.mean.len() / 2;
        self.covariance.view((0, 0), (k, k)).into_owned()
    }
}

fn difference_stats(trajs: &[Trajectory], n: usize, order: DifferenceOrder) -> Result<DifferenceStats> {
    if trajs.len() < 2 {
        return Err(Error::invalid("difference statistics need at least two trajectories"));
    }
    if order == DifferenceOrder::Second && n == 0 {
        return Err(Error::invalid("second differences need n ≥ 1"));
    }
    if let Some(short) = trajs.iter().find(|t| t.len() <= n + 1) {
        return Err(Error::invalid(format!(
            "trajectory of length {} is too short for step {n}",
            short.len()
        )));
    }
    let d = 2 * trajs[0].config_dim();
    if trajs.iter().any(|t| 2 * t.config_dim() != d) {
        return Err(Error::invalid("trajectories have different state dimensions"));
    }
    let mut samples = DMatrix::zeros(trajs.len(), d);
    for (r, t) in trajs.iter().enumerate() {
        let window: Vec<_> = (n.saturating_sub(1)..=n + 1).map(|i| t.z(i)).collect();
        let local = if n == 0 { 0 } else { 1 };
        samples
            .row_mut(r)
            .copy_from(&difference_at(&window, local, order).transpose());
    }
    Ok(DifferenceStats {
        mean: column_means(&samples),
        covariance: sample_covariance(&samples),
        samples: trajs.len(),
    })
}

/// Empirical moments of `δ¹_n = z⁰_{n+1} − z⁰_n` across trajectories.
pub fn first_difference_stats(trajs: &[Trajectory], n: usize) -> Result<DifferenceStats> {
    difference_stats(trajs, n, DifferenceOrder::First)
}

/// Empirical moments of `δ²_n = z⁰_{n+1} − 2z⁰_n + z⁰_{n−1}` across trajectories.
pub fn second_difference_stats(trajs: &[Trajectory], n: usize) -> Result<DifferenceStats> {
    difference_stats(trajs, n, DifferenceOrder::Second)
}

/// Mean Frobenius norm `‖B̃_n − B̃_{n−1}‖` across trajectories, the size of the
/// slowly-varying-input-map assumption behind the second-difference moments.
pub fn input_map_drift(spec: &SystemSpec, trajs: &[Trajectory], n: usize) -> Result<f64> {
    if n == 0 || trajs.is_empty() {
        return Err(Error::invalid("input-map drift needs n ≥ 1 and a trajectory"));
    }
    let mut total = 0.0;
    for t in trajs {
        if t.len() <= n {
            return Err(Error::invalid("trajectory too short for input-map drift"));
        }
        let now = tilde_b(spec, &t.states[n].q)?;
        let before = tilde_b(spec, &t.states[n - 1].q)?;
        total += (now - before).norm();
    }
    Ok(total / trajs.len() as f64)
}

/// Standardised third and fourth moments of one coordinate. `None` when the
/// coordinate has zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub degenerate: bool,
}

/// Per-coordinate skewness and excess kurtosis of an `S×d` sample matrix.
pub fn normality_diagnostic(samples: &DMatrix<f64>) -> Result<Vec<CoordinateMoments>> {
    let s = samples.nrows();
    if s < 100 {
        return Err(Error::invalid(format!(
            "normality diagnostic needs ≥ 100 samples, got {s}"
        )));
    }
    let n = s as f64;
    Ok(samples
        .column_iter()
        .map(|col| {
            let mean = col.sum() / n;
            let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
            for &x in col.iter() {
                let d = x - mean;
                let d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
            m2 /= n;
            m3 /= n;
            m4 /= n;
            let scale = mean.abs().max(1.0);
            if m2 <= (1e-12 * scale).powi(2) {
                CoordinateMoments {
                    skewness: None,
                    excess_kurtosis: None,
                    degenerate: true,
                }
            } else {
                CoordinateMoments {
                    skewness: Some(m3 / m2.powf(1.5)),
                    excess_kurtosis: Some(m4 / (m2 * m2) - 3.0),
                    degenerate: false,
                }
            }
        })
        .collect())
}
