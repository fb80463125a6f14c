//! Per-encoder metric reports.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dpi::sample_sd;
use super::mine::{mine_mi, MineConfig};
use super::probe::{regression_probe, ProbeConfig};
use super::smoothness::{
    smoothness_ratio_histogram, temporal_distance_profile, uniqueness_score, ProfilePoint, RatioHistogram,
};
use super::PairedSamples;
use crate::encoders::{EncoderSpec, GroundTruth, LatentTrajectory};
use crate::error::{Error, Result};
use crate::lagsim::Trajectory;
use crate::linalg::stack_rows;
use crate::rng::derive_seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// MINE estimate of `I(z; z⁰)`.
    Mine,
    /// kNN entropy, smoothness bound and uniqueness score.
    Uniqueness,
    /// Held-out error of the regression probe.
    Regression,
    TemporalProfile,
    RatioHistogram,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Mine,
        Metric::Uniqueness,
        Metric::Regression,
        Metric::TemporalProfile,
        Metric::RatioHistogram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mine => "mine",
            Metric::Uniqueness => "uniqueness",
            Metric::Regression => "regression",
            Metric::TemporalProfile => "temporal-profile",
            Metric::RatioHistogram => "ratio-histogram",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
            Error::invalid(format!("unknown metric `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub metrics: Vec<Metric>,
    pub mine: MineConfig,
    pub probe: ProbeConfig,
    pub knn_k: usize,
    /// Exploration-noise scale for the smoothness bound; estimated from the
    /// true trajectories when absent.
    pub alpha: Option<f64>,
    pub offsets: Vec<usize>,
    pub histogram_bins: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            mine: MineConfig::default(),
            probe: ProbeConfig::default(),
            knn_k: 5,
            alpha: None,
            offsets: vec![1, 2, 5, 10, 20, 50],
            histogram_bins: 20,
        }
    }
}

/// A metric evaluated once per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededValue {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across seeds; only with two or more seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
}

impl SeededValue {
    pub fn new(per_seed: Vec<f64>) -> Self {
        let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        let spread = (per_seed.len() >= 2).then(|| sample_sd(&per_seed));
        Self { per_seed, mean, spread }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFailure {
    pub metric: Metric,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub encoder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    pub seeds: Vec<u64>,
    pub samples: usize,
    /// MINE inputs are standardized per coordinate before training.
    pub inputs_standardized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mi: Option<SeededValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_step_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression_error: Option<SeededValue>,
    /// Per-coordinate held-out error, averaged over seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression_per_coordinate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_profile: Option<Vec<ProfilePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_histogram: Option<RatioHistogram>,
    #[serde(default)]
    pub failures: Vec<MetricFailure>,
}

impl MetricReport {
    fn empty(encoder: String, seeds: &[u64], samples: usize) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            encoder,
            kind: None,
            ground_truth: None,
            seeds: seeds.to_vec(),
            samples,
            inputs_standardized: true,
            mi: None,
            entropy: None,
            alpha: None,
            smoothness_bound: None,
            uniqueness_score: None,
            mean_step_norm: None,
            regression_error: None,
            regression_per_coordinate: None,
            temporal_profile: None,
            ratio_histogram: None,
            failures: Vec::new(),
        }
    }

    /// Fill in the encoder kind and its ground-truth label.
    pub fn with_encoder(mut self, encoder: &EncoderSpec) -> Self {
        self.kind = Some(encoder.kind_name().to_string());
        self.ground_truth = Some(encoder.ground_truth());
        self
    }

    /// True when every one of `requested` metrics failed at least once.
    pub fn all_failed(&self, requested: usize) -> bool {
        let failed: std::collections::BTreeSet<_> = self.failures.iter().map(|f| f.metric).collect();
        requested > 0 && failed.len() >= requested
    }

    /// Combine single-seed reports of one encoder. Per-seed values are
    /// concatenated, scalar estimates and profiles averaged, and the first
    /// histogram kept.
    pub fn merge(parts: Vec<MetricReport>) -> Result<MetricReport> {
        let mut parts = parts.into_iter();
        let mut out = parts.next().ok_or_else(|| Error::invalid("nothing to merge"))?;
        let mut counts = Counts::default();
        counts.observe(&out);
        for p in parts {
            if p.encoder != out.encoder {
                return Err(Error::invalid("merged reports describe different encoders"));
            }
            counts.observe(&p);
            out.seeds.extend(&p.seeds);
            out.failures.extend(p.failures);
            out.mi = concat(out.mi.take(), p.mi);
            out.regression_error = concat(out.regression_error.take(), p.regression_error);
            for (acc, v) in [
                (&mut out.entropy, p.entropy),
                (&mut out.alpha, p.alpha),
                (&mut out.smoothness_bound, p.smoothness_bound),
                (&mut out.uniqueness_score, p.uniqueness_score),
                (&mut out.mean_step_norm, p.mean_step_norm),
            ] {
                *acc = match (*acc, v) {
                    (Some(a), Some(b)) => Some(a + b),
                    (a, b) => a.or(b),
                };
            }
            out.regression_per_coordinate = match (out.regression_per_coordinate.take(), p.regression_per_coordinate) {
                (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
                (a, b) => a.or(b),
            };
            out.temporal_profile = match (out.temporal_profile.take(), p.temporal_profile) {
                (Some(mut a), Some(b)) => {
                    for (x, y) in a.iter_mut().zip(&b) {
                        x.mean_distance += y.mean_distance;
                    }
                    Some(a)
                }
                (a, b) => a.or(b),
            };
            out.ratio_histogram = out.ratio_histogram.take().or(p.ratio_histogram);
        }
        let div = |v: &mut Option<f64>, n: usize| {
            if let Some(x) = v {
                *x /= n as f64;
            }
        };
        div(&mut out.entropy, counts.uniqueness);
        div(&mut out.smoothness_bound, counts.bound);
        div(&mut out.uniqueness_score, counts.bound);
        div(&mut out.mean_step_norm, counts.uniqueness);
        div(&mut out.alpha, counts.alpha);
        if let Some(v) = &mut out.regression_per_coordinate {
            v.iter_mut().for_each(|x| *x /= counts.regression as f64);
        }
        if let Some(v) = &mut out.temporal_profile {
            v.iter_mut().for_each(|x| x.mean_distance /= counts.profile as f64);
        }
        Ok(out)
    }

    fn record<T>(&mut self, metric: Metric, outcome: Result<T>) -> Option<T> {
        match outcome {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(MetricFailure {
                    metric,
                    message: e.to_string(),
                    exit_code: e.exit_code(),
                });
                None
            }
        }
    }
}

#[derive(Default)]
struct Counts {
    uniqueness: usize,
    bound: usize,
    alpha: usize,
    regression: usize,
    profile: usize,
}

impl Counts {
    fn observe(&mut self, r: &MetricReport) {
        self.uniqueness += r.entropy.is_some() as usize;
        self.bound += r.smoothness_bound.is_some() as usize;
        self.alpha += r.alpha.is_some() as usize;
        self.regression += r.regression_per_coordinate.is_some() as usize;
        self.profile += r.temporal_profile.is_some() as usize;
    }
}

fn concat(a: Option<SeededValue>, b: Option<SeededValue>) -> Option<SeededValue> {
    match (a, b) {
        (Some(a), Some(b)) => Some(SeededValue::new(a.per_seed.into_iter().chain(b.per_seed).collect())),
        (a, b) => a.or(b),
    }
}

/// Pool aligned latent and true trajectories into paired samples.
pub fn pair_samples(latents: &[LatentTrajectory], trues: &[Trajectory]) -> Result<PairedSamples> {
    if latents.len() != trues.len() || latents.iter().zip(trues).any(|(l, t)| l.len() != t.len()) {
        return Err(Error::invalid("latent and true trajectories are not aligned"));
    }
    let z = stack_rows(
        &latents
            .iter()
            .flat_map(|l| l.latents.iter().cloned())
            .collect::<Vec<_>>(),
    )?;
    let z0 = stack_rows(
        &trues
            .iter()
            .flat_map(|t| (0..t.len()).map(move |n| t.z(n)))
            .collect::<Vec<_>>(),
    )?;
    PairedSamples::new(z, z0)
}

fn per_seed<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Evaluate the selected metrics for one encoder. Failures of individual
/// metrics are recorded in the report rather than aborting the others.
/// `alpha` is required for the uniqueness metric.
pub fn evaluate(
    latents: &[LatentTrajectory],
    trues: &[Trajectory],
    alpha: Option<f64>,
    cfg: &EvaluationConfig,
    seeds: &[u64],
) -> Result<MetricReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let samples = pair_samples(latents, trues)?;
    let encoder = latents.first().map(|l| l.encoder.clone()).unwrap_or_default();
    let mut report = MetricReport::empty(encoder, seeds, samples.len());
    report.alpha = alpha;

    for &metric in &cfg.metrics {
        match metric {
            Metric::Mine => {
                let out = per_seed(seeds, |s| mine_mi(&samples, &cfg.mine, derive_seed(s, 1)).map(|e| e.mi));
                report.mi = report.record(metric, out).map(SeededValue::new);
            }
            Metric::Uniqueness => {
                let out = alpha
                    .ok_or_else(|| Error::invalid("uniqueness score needs alpha"))
                    .and_then(|a| uniqueness_score(latents, trues, a, cfg.knn_k));
                if let Some(u) = report.record(metric, out) {
                    report.entropy = Some(u.entropy);
                    report.smoothness_bound = u.bound;
                    report.uniqueness_score = u.score;
                    report.mean_step_norm = Some(u.mean_step_norm);
                }
            }
            Metric::Regression => {
                let out = per_seed(seeds, |s| regression_probe(&samples, &cfg.probe, derive_seed(s, 2)));
                if let Some(results) = report.record(metric, out) {
                    let dims = results[0].per_coordinate.len();
                    let n = results.len() as f64;
                    report.regression_per_coordinate = Some(
                        (0..dims)
                            .map(|c| results.iter().map(|r| r.per_coordinate[c]).sum::<f64>() / n)
                            .collect(),
                    );
                    report.regression_error =
                        Some(SeededValue::new(results.iter().map(|r| r.validation_error).collect()));
                }
            }
            Metric::TemporalProfile => {
                let out = temporal_distance_profile(latents, &cfg.offsets);
                report.temporal_profile = report.record(metric, out);
            }
            Metric::RatioHistogram => {
                let out = smoothness_ratio_histogram(latents, trues, cfg.histogram_bins);
                report.ratio_histogram = report.record(metric, out);
            }
        }
    }
    Ok(report)
}
