//! Smoothness bound on `E ln|J_g|`, the exploration-noise scale `α`, the
//! uniqueness score, and the temporal diagnostics built on latent steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::knn::knn_entropy;
use crate::encoders::{EncoderSpec, LatentTrajectory};
use crate::error::{Error, Result};
use crate::lagsim::{trajectory_differences, DifferenceOrder, Trajectory};
use crate::linalg::stack_rows;

/// Pairs with a true-state step below this norm are skipped by the ratio
/// histogram.
pub const MIN_STEP_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBound {
    /// `(d/2)(ln Ê‖z_{n+1} − z_n‖² − ln(αd))`; `-inf` for a constant representation.
    pub value: f64,
    pub mean_squared_step: f64,
    pub dim: usize,
    pub pairs: usize,
}

impl SmoothnessBound {
    pub fn is_constant(&self) -> bool {
        self.mean_squared_step == 0.0
    }
}

/// `(d/2)(ln m − ln(αd))` for a mean squared latent step `m`.
pub fn bound_from_mean_sq_step(mean_squared_step: f64, alpha: f64, dim: usize) -> f64 {
    let d = dim as f64;
    if mean_squared_step == 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * d * (mean_squared_step.ln() - (alpha * d).ln())
}

fn consecutive_steps(latents: &[LatentTrajectory]) -> impl Iterator<Item = DVector<f64>> + '_ {
    latents.iter().flat_map(|t| t.latents.windows(2).map(|w| &w[1] - &w[0]))
}

/// Upper bound on `E ln|J_g|` from consecutive latent steps, pooled over all
/// supplied trajectories. The dimension is the latent dimension.
pub fn smoothness_bound(latents: &[LatentTrajectory], alpha: f64) -> Result<SmoothnessBound> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let dim = check_latents(latents)?;
    if latents.iter().any(|t| t.len() < 2) {
        return Err(Error::invalid("smoothness bound needs trajectories of length ≥ 2"));
    }
    let (sum, pairs) = consecutive_steps(latents).fold((0.0, 0usize), |(s, c), d| (s + d.norm_squared(), c + 1));
    let mean_squared_step = sum / pairs as f64;
    Ok(SmoothnessBound {
        value: bound_from_mean_sq_step(mean_squared_step, alpha, dim),
        mean_squared_step,
        dim,
        pairs,
    })
}

fn check_latents(latents: &[LatentTrajectory]) -> Result<usize> {
    let dim = latents
        .first()
        .map(LatentTrajectory::dim)
        .ok_or_else(|| Error::invalid("no latent trajectories"))?;
    if dim == 0 || latents.iter().any(|t| t.dim() != dim) {
        return Err(Error::invalid("latent trajectories have inconsistent dimensions"));
    }
    Ok(dim)
}

fn check_aligned(latents: &[LatentTrajectory], trues: &[Trajectory]) -> Result<()> {
    if latents.len() != trues.len() || latents.iter().zip(trues).any(|(l, t)| l.len() != t.len()) {
        return Err(Error::invalid("latent and true trajectories are not aligned"));
    }
    Ok(())
}

/// Monte-Carlo mean of `ln|det J_g(z⁰_n)|` over every state of `trues`.
pub fn mean_log_abs_det(encoder: &EncoderSpec, trues: &[Trajectory]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in trues {
        for n in 0..t.len() {
            sum += encoder.log_abs_det_jacobian(&t.z(n))?.log_abs;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no states to average over"));
    }
    Ok(sum / count as f64)
}

/// Moment-matched isotropic fit `δ ~ N(0, αI)` of state differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub coordinate_variances: Vec<f64>,
    /// Largest over smallest coordinate variance; `None` when the smallest is 0.
    pub anisotropy_ratio: Option<f64>,
    pub degenerate: bool,
    pub samples: usize,
}

/// `α` as the mean per-coordinate variance of the rows of `diffs`.
pub fn alpha_from_differences(diffs: &DMatrix<f64>) -> Result<AlphaEstimate> {
    let s = diffs.nrows();
    if s < 100 {
        return Err(Error::invalid(format!(
            "alpha estimation needs ≥ 100 difference samples, got {s}"
        )));
    }
    let variances: Vec<f64> = diffs
        .column_iter()
        .map(|c| {
            let mean = c.mean();
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64
        })
        .collect();
    let alpha = variances.iter().sum::<f64>() / variances.len() as f64;
    let (lo, hi) = variances
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(AlphaEstimate {
        alpha,
        anisotropy_ratio: (lo > 0.0).then(|| hi / lo),
        degenerate: alpha == 0.0,
        coordinate_variances: variances,
        samples: s,
    })
}

/// `α` from the pooled true-state differences of the given order.
pub fn estimate_alpha(trues: &[Trajectory], order: DifferenceOrder) -> Result<AlphaEstimate> {
    let blocks: Vec<DMatrix<f64>> = trues.iter().map(|t| trajectory_differences(t, order)).collect();
    let rows: usize = blocks.iter().map(DMatrix::nrows).sum();
    let cols = blocks.first().map_or(0, DMatrix::ncols);
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(Error::invalid("trajectories have different state dimensions"));
    }
    let mut all = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in &blocks {
        all.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    alpha_from_differences(&all)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessScore {
    /// kNN entropy of the pooled latents.
    pub entropy: f64,
    /// `None` when the encoder changes dimension.
    pub bound: Option<f64>,
    /// `entropy − bound`; `None` when the bound is not defined.
    pub score: Option<f64>,
    pub mean_step_norm: f64,
}

/// `H(z) − bound` for square encoders. Non-square latents report only the
/// entropy and the mean step norm.
pub fn uniqueness_score(
    latents: &[LatentTrajectory],
    trues: &[Trajectory],
    alpha: f64,
    knn_k: usize,
) -> Result<UniquenessScore> {
    check_aligned(latents, trues)?;
    let dim = check_latents(latents)?;
    let pooled = stack_rows(
        &latents
            .iter()
            .flat_map(|t| t.latents.iter().cloned())
            .collect::<Vec<_>>(),
    )?;
    let entropy = knn_entropy(&pooled, knn_k)?;
    let (steps, norm_sum) = consecutive_steps(latents).fold((0usize, 0.0), |(c, s), d| (c + 1, s + d.norm()));
    if steps == 0 {
        return Err(Error::invalid("uniqueness score needs trajectories of length ≥ 2"));
    }
    let square = trues.first().is_some_and(|t| 2 * t.config_dim() == dim);
    let bound = if square {
        Some(smoothness_bound(latents, alpha)?.value)
    } else {
        None
    };
    Ok(UniquenessScore {
        entropy,
        bound,
        score: bound.map(|b| entropy - b),
        mean_step_norm: norm_sum / steps as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub offset: usize,
    pub mean_distance: f64,
}

/// `Ê‖z_n − z_{n+T}‖` pooled over `n` and trajectories, for each offset `T`.
pub fn temporal_distance_profile(latents: &[LatentTrajectory], offsets: &[usize]) -> Result<Vec<ProfilePoint>> {
    if offsets.is_empty() {
        return Err(Error::invalid("no offsets requested"));
    }
    check_latents(latents)?;
    let shortest = latents.iter().map(LatentTrajectory::len).min().unwrap_or(0);
    if let Some(&bad) = offsets.iter().find(|&&t| t >= shortest) {
        return Err(Error::invalid(format!(
            "offset {bad} is not below the shortest trajectory length {shortest}"
        )));
    }
    Ok(offsets
        .iter()
        .map(|&t| {
            let (sum, count) = latents
                .iter()
                .flat_map(|l| (0..l.len() - t).map(move |n| (&l.latents[n] - &l.latents[n + t]).norm()))
                .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
            ProfilePoint {
                offset: t,
                mean_distance: sum / count as f64,
            }
        })
        .collect())
}

/// Per-pair ratios `‖z_n − z_{n+1}‖ / ‖z⁰_n − z⁰_{n+1}‖` and the number of
/// pairs skipped because the true state did not move.
pub fn smoothness_ratios(latents: &[LatentTrajectory], trues: &[Trajectory]) -> Result<(Vec<f64>, usize)> {
    check_aligned(latents, trues)?;
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for (l, t) in latents.iter().zip(trues) {
        for n in 0..l.len().saturating_sub(1) {
            let dz0 = (t.z(n) - t.z(n + 1)).norm();
            if dz0 < MIN_STEP_NORM {
                skipped += 1;
            } else {
                ratios.push((&l.latents[n] - &l.latents[n + 1]).norm() / dz0);
            }
        }
    }
    Ok((ratios, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioHistogram {
    /// `bins + 1` increasing edges; bin `i` is `[edges[i], edges[i+1])`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub skipped: usize,
}

impl RatioHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Index of the bin containing `x`.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let last = *self.edges.last()?;
        if x < self.edges[0] || x >= last {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }
}

/// Histogram of encoder smoothness ratios on `bins` equal-width bins spanning
/// `[0, max ratio]`.
pub fn smoothness_ratio_histogram(
    latents: &[LatentTrajectory],
    trues: &[Trajectory],
    bins: usize,
) -> Result<RatioHistogram> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let (ratios, skipped) = smoothness_ratios(latents, trues)?;
    if ratios.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {skipped} consecutive pairs have a zero true-state step"
        )));
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let upper = if max > 0.0 { max * (1.0 + 1e-9) } else { 1.0 };
    let width = upper / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| i as f64 * width).collect();
    edges.push(upper);
    let mut counts = vec![0; bins];
    for r in ratios {
        counts[((r / width) as usize).min(bins - 1)] += 1;
    }
    Ok(RatioHistogram { edges, counts, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagsim::{isotropic_walk, rollout, ExplorationPolicy, SystemSpec};
    use crate::rng::SeededRng;

    fn latent(rows: Vec<Vec<f64>>) -> LatentTrajectory {
        LatentTrajectory {
            latents: rows.into_iter().map(DVector::from_vec).collect(),
            sample_time: 1.0,
            encoder: "test".into(),
            source_seed: 0,
            noise_seed: 0,
        }
    }

    #[test]
    fn diag_jacobian_gap_from_exact_moments() {
        let alpha = 0.12;
        // J = diag(1, 2): E‖Jδ‖² = α(1 + 4) for δ ~ N(0, αI)
        let bound = bound_from_mean_sq_step(5.0 * alpha, alpha, 2);
        assert!((bound - 2.5f64.ln()).abs() < 1e-12);
        assert!((bound - 2f64.ln() - 0.2231).abs() < 1e-4);
    }

    #[test]
    fn constant_representation_is_negative_infinity() {
        let l = latent(vec![vec![1.0, 2.0]; 5]);
        let b = smoothness_bound(&[l], 0.1).unwrap();
        assert!(b.is_constant() && b.value == f64::NEG_INFINITY);
        assert!(smoothness_bound(&[latent(vec![vec![0.0]])], 0.1).is_err());
    }

    #[test]
    fn alpha_of_isotropic_and_anisotropic_differences() {
        let mut rng = SeededRng::new(8);
        let iso = DMatrix::from_fn(10_000, 4, |_, _| 0.12f64.sqrt() * rng.normal());
        let est = alpha_from_differences(&iso).unwrap();
        assert!((est.alpha - 0.12).abs() < 0.005, "{}", est.alpha);

        let aniso = DMatrix::from_fn(10_000, 2, |_, c| if c == 0 { 1.0 } else { 2.0 } * rng.normal());
        let est = alpha_from_differences(&aniso).unwrap();
        assert!((est.alpha - 2.5).abs() < 0.1);
        assert!((est.anisotropy_ratio.unwrap() - 4.0).abs() < 0.3);

        let zero = alpha_from_differences(&DMatrix::zeros(200, 2)).unwrap();
        assert!(zero.degenerate && zero.alpha == 0.0 && zero.anisotropy_ratio.is_none());
        assert!(alpha_from_differences(&DMatrix::zeros(50, 2)).is_err());
    }

    #[test]
    fn alpha_from_walk() {
        let walks: Vec<_> = (0..10).map(|s| isotropic_walk(1, 200, 0.3, s).unwrap()).collect();
        let est = estimate_alpha(&walks, DifferenceOrder::First).unwrap();
        assert_eq!(est.samples, 1990);
        assert!((est.alpha - 0.3).abs() < 0.03);
    }

    #[test]
    fn ramp_profile_equals_offset() {
        let l = latent((0..50).map(|n| vec![n as f64]).collect());
        let p = temporal_distance_profile(&[l.clone()], &[0, 1, 7, 49]).unwrap();
        for pt in p {
            assert_eq!(pt.mean_distance, pt.offset as f64);
        }
        assert!(temporal_distance_profile(&[l.clone()], &[]).is_err());
        assert!(temporal_distance_profile(&[l], &[50]).is_err());
    }

    #[test]
    fn identity_ratios_sit_at_one() {
        let spec = SystemSpec::double_integrator(2, 0.05);
        let traj = rollout(&spec, &ExplorationPolicy::random(2, 1.0).unwrap(), 100, 3).unwrap();
        let enc = EncoderSpec::identity(4);
        let lat = enc.encode_trajectory(&traj, 0).unwrap();
        let h = smoothness_ratio_histogram(&[lat], &[traj], 10).unwrap();
        // the state starts at rest, so the first pair still moves only if τ₀ ≠ 0
        assert_eq!(h.total() + h.skipped, 99);
        let one = h.bin_of(1.0).unwrap();
        assert_eq!(h.counts[one], h.total());
    }

    #[test]
    fn all_pairs_skipped_is_degenerate() {
        let spec = SystemSpec::double_integrator(1, 0.05);
        let traj = rollout(&spec, &ExplorationPolicy::random(1, 0.0).unwrap(), 10, 0).unwrap();
        let lat = EncoderSpec::identity(2).encode_trajectory(&traj, 0).unwrap();
        assert!(matches!(
            smoothness_ratio_histogram(&[lat], &[traj], 5),
            Err(Error::Degenerate(_))
        ));
    }
}
