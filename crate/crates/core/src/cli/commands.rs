use std::cmp::Ordering;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ResolvedConfig;
use super::plot;
use crate::encoders::{build_zoo, read_latent, write_latent, EncoderSpec, LatentTrajectory};
use crate::error::{Error, Result};
use crate::lagsim::{read_trajectory, rollouts, write_trajectory, Trajectory};
use crate::metrics::{estimate_alpha, evaluate, MetricReport, REPORT_SCHEMA_VERSION};
use crate::rng::derive_seed;
use crate::table::write_atomic;

/// File-name-safe form of an encoder id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn trajectory_dir(out: &Path, seed: u64) -> PathBuf {
    out.join("trajectories").join(format!("seed-{seed}"))
}

pub fn latent_dir(out: &Path, seed: u64, encoder: &str) -> PathBuf {
    out.join("latents")
        .join(format!("seed-{seed}"))
        .join(file_stem(encoder))
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

fn rollout_name(i: usize) -> String {
    format!("rollout-{i:04}.csv")
}

/// `*.csv` files of a directory in name order.
fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergedRollout {
    pub seed: u64,
    pub rollout: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub written: Vec<PathBuf>,
    pub diverged: Vec<DivergedRollout>,
}

/// Roll out `rollouts` trajectories for every seed. A diverging rollout is
/// reported and skipped; the run fails only if every rollout diverged.
pub fn cmd_simulate(cfg: &ResolvedConfig) -> Result<SimulateSummary> {
    let policy = cfg.run.policy.build()?;
    let mut summary = SimulateSummary::default();
    for &seed in &cfg.run.seeds {
        let dir = trajectory_dir(cfg.out(), seed);
        let results = rollouts(&cfg.system, &policy, cfg.run.steps, cfg.run.rollouts, seed);
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(traj) => {
                    let path = dir.join(rollout_name(i));
                    write_trajectory(&path, &traj)?;
                    summary.written.push(path);
                }
                Err(Error::Diverged { step }) => summary.diverged.push(DivergedRollout { seed, rollout: i, step }),
                Err(e) => return Err(e),
            }
        }
    }
    if summary.written.is_empty() {
        let step = summary.diverged.first().map_or(0, |d| d.step);
        return Err(Error::Diverged { step });
    }
    Ok(summary)
}

fn load_trajectories(out: &Path, seed: u64) -> Result<Vec<(PathBuf, Trajectory)>> {
    let dir = trajectory_dir(out, seed);
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "no trajectories at {}; run `simulate` first",
            dir.display()
        )));
    }
    let files = csv_files(&dir)?;
    if files.is_empty() {
        return Err(Error::Config(format!("{} contains no trajectory files", dir.display())));
    }
    files
        .into_par_iter()
        .map(|p| read_trajectory(&p).map(|t| (p, t)))
        .collect()
}

fn build(cfg: &ResolvedConfig) -> Result<Vec<EncoderSpec>> {
    build_zoo(&cfg.zoo, cfg.system.state_dim())
}

/// Encode every trajectory of every seed with every zoo encoder.
pub fn cmd_encode(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let zoo = build(cfg)?;
    let mut written = Vec::new();
    for &seed in &cfg.run.seeds {
        let trajs = load_trajectories(cfg.out(), seed)?;
        let jobs: Vec<_> = trajs.iter().flat_map(|t| zoo.iter().map(move |e| (t, e))).collect();
        let paths = jobs
            .into_par_iter()
            .map(|((path, traj), enc)| {
                let lat = enc.encode_trajectory(traj, derive_seed(enc.seed(), traj.meta.seed))?;
                let name = path.file_name().expect("listed files have names");
                let target = latent_dir(cfg.out(), seed, &enc.id).join(name);
                write_latent(&target, &lat)?;
                Ok(target)
            })
            .collect::<Result<Vec<_>>>()?;
        written.extend(paths);
    }
    Ok(written)
}

fn load_latents(
    out: &Path,
    seed: u64,
    encoder: &str,
    trajs: &[(PathBuf, Trajectory)],
) -> Result<Vec<LatentTrajectory>> {
    let dir = latent_dir(out, seed, encoder);
    trajs
        .iter()
        .map(|(p, _)| {
            let path = dir.join(p.file_name().expect("listed files have names"));
            if !path.exists() {
                return Err(Error::Config(format!("missing {}; run `encode` first", path.display())));
            }
            read_latent(&path)
        })
        .collect()
}

fn write_report_files(dir: &Path, report: &MetricReport) -> Result<()> {
    let stem = file_stem(&report.encoder);
    write_json(&dir.join(format!("{stem}.json")), report)?;
    if let Some(profile) = &report.temporal_profile {
        let mut text = String::from("offset,mean_distance\n");
        for p in profile {
            text.push_str(&format!("{},{}\n", p.offset, p.mean_distance));
        }
        write_atomic(&dir.join(format!("{stem}.profile.csv")), text.as_bytes())?;
    }
    if let Some(h) = &report.ratio_histogram {
        let mut text = String::from("lower,upper,count\n");
        for (i, c) in h.counts.iter().enumerate() {
            text.push_str(&format!("{},{},{}\n", h.edges[i], h.edges[i + 1], c));
        }
        write_atomic(&dir.join(format!("{stem}.histogram.csv")), text.as_bytes())?;
    }
    Ok(())
}

/// Evaluate every zoo encoder on every seed's dataset and write one report
/// per encoder. Per-metric failures are recorded inside the reports.
pub fn cmd_evaluate(cfg: &ResolvedConfig) -> Result<Vec<MetricReport>> {
    let zoo = build(cfg)?;
    let ev = &cfg.run.evaluation;
    let datasets = cfg
        .run
        .seeds
        .iter()
        .map(|&seed| {
            let trajs = load_trajectories(cfg.out(), seed)?;
            let trues: Vec<Trajectory> = trajs.iter().map(|(_, t)| t.clone()).collect();
            let alpha = match ev.alpha {
                Some(a) => Some(a),
                None => estimate_alpha(&trues, cfg.difference_order())
                    .ok()
                    .map(|a| a.alpha)
                    .filter(|a| *a > 0.0),
            };
            Ok((seed, trajs, trues, alpha))
        })
        .collect::<Result<Vec<_>>>()?;

    let reports = zoo
        .par_iter()
        .map(|enc| {
            let parts = datasets
                .iter()
                .map(|(seed, trajs, trues, alpha)| {
                    let latents = load_latents(cfg.out(), *seed, &enc.id, trajs)?;
                    evaluate(&latents, trues, *alpha, ev, &[*seed])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut report = MetricReport::merge(parts)?.with_encoder(enc);
            report.encoder = enc.id.clone();
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;

    let dir = report_dir(cfg.out());
    for r in &reports {
        write_report_files(&dir, r)?;
    }
    Ok(reports)
}

/// Read reports, rejecting any whose schema version differs from this build.
pub fn load_reports(paths: &[PathBuf]) -> Result<Vec<MetricReport>> {
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.clone(),
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
        match value.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(REPORT_SCHEMA_VERSION) => {}
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "{}: report schema {:?}, expected {REPORT_SCHEMA_VERSION}",
                    path.display(),
                    other
                )))
            }
        }
        reports.push(serde_json::from_value(value).map_err(|e| Error::Corrupt {
            path: path.clone(),
            line: 1,
            reason: e.to_string(),
        })?);
    }
    Ok(reports)
}

/// Report files written by `evaluate` under `out`.
pub fn discover_reports(out: &Path) -> Result<Vec<PathBuf>> {
    let dir = report_dir(out);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankKey {
    /// Mean MINE estimate, descending.
    Mi,
    /// Mean regression-probe error, ascending.
    RegressionError,
    /// Uniqueness score, descending.
    UniquenessScore,
}

impl RankKey {
    pub fn name(self) -> &'static str {
        match self {
            RankKey::Mi => "mi",
            RankKey::RegressionError => "regression-error",
            RankKey::UniquenessScore => "uniqueness-score",
        }
    }

    fn value(self, r: &MetricReport) -> Option<f64> {
        match self {
            RankKey::Mi => r.mi.as_ref().map(|v| v.mean),
            RankKey::RegressionError => r.regression_error.as_ref().map(|v| v.mean),
            RankKey::UniquenessScore => r.uniqueness_score,
        }
        .filter(|v| !v.is_nan())
    }

    fn spread(self, r: &MetricReport) -> Option<f64> {
        match self {
            RankKey::Mi => r.mi.as_ref().and_then(|v| v.spread),
            RankKey::RegressionError => r.regression_error.as_ref().and_then(|v| v.spread),
            RankKey::UniquenessScore => None,
        }
    }

    fn ascending(self) -> bool {
        self == RankKey::RegressionError
    }
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [RankKey::Mi, RankKey::RegressionError, RankKey::UniquenessScore]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown ranking key `{s}` (mi, regression-error, uniqueness-score)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub encoder: String,
    pub value: Option<f64>,
    pub spread: Option<f64>,
}

/// Order reports by `key`; reports without the metric go last and ties are
/// broken by encoder id.
pub fn rank_reports(reports: &[MetricReport], key: RankKey) -> Result<Vec<RankRow>> {
    if reports.len() < 2 {
        return Err(Error::invalid("ranking needs at least two reports"));
    }
    let mut order: Vec<&MetricReport> = reports.iter().collect();
    order.sort_by(|a, b| {
        let by_value = match (key.value(a), key.value(b)) {
            (Some(x), Some(y)) if key.ascending() => x.total_cmp(&y),
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_value.then_with(|| a.encoder.cmp(&b.encoder))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(i, r)| RankRow {
            rank: i + 1,
            encoder: r.encoder.clone(),
            value: key.value(r),
            spread: key.spread(r),
        })
        .collect())
}

/// Rank the given report files and write `ranking.csv` and `ranking.json`.
pub fn cmd_rank(reports: &[PathBuf], key: RankKey, out: &Path) -> Result<Vec<RankRow>> {
    let rows = rank_reports(&load_reports(reports)?, key)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record(["rank", "encoder", key.name(), "spread"])
        .map_err(csv_err)?;
    for r in &rows {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([r.rank.to_string(), r.encoder.clone(), opt(r.value), opt(r.spread)])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_atomic(&out.join("ranking.csv"), &bytes)?;
    write_json(&out.join("ranking.json"), &serde_json::json!({"by": key, "rows": rows}))?;
    Ok(rows)
}

/// Write SVG figures for the given reports: MI against uniqueness score,
/// temporal-distance curves, and one smoothness-ratio histogram per encoder.
pub fn cmd_report(reports: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports given; run `evaluate` first"));
    }
    let mut reports = load_reports(reports)?;
    reports.sort_by(|a, b| a.encoder.cmp(&b.encoder));
    let dir = out.join("plots");
    let mut written = Vec::new();
    let mut emit = |name: String, svg: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
        Ok(())
    };

    let points: Vec<_> = reports
        .iter()
        .filter_map(|r| Some((r.encoder.clone(), r.uniqueness_score?, r.mi.as_ref()?.mean)))
        .collect();
    emit(
        "mi_vs_uniqueness.svg".into(),
        plot::scatter(
            "MI vs uniqueness score",
            "H(z) - smoothness bound (nats)",
            "MINE estimate (nats)",
            &points,
        ),
    )?;

    let series: Vec<_> = reports
        .iter()
        .filter_map(|r| {
            let pts = r
                .temporal_profile
                .as_ref()?
                .iter()
                .map(|p| (p.offset as f64, p.mean_distance))
                .collect();
            Some((r.encoder.clone(), pts))
        })
        .collect();
    emit(
        "temporal_profiles.svg".into(),
        plot::lines(
            "Latent distance by time offset",
            "offset T (steps)",
            "mean |z_n - z_(n+T)|",
            &series,
        ),
    )?;

    for r in &reports {
        if let Some(h) = &r.ratio_histogram {
            emit(
                format!("histogram_{}.svg", file_stem(&r.encoder)),
                plot::histogram(
                    &format!("Smoothness ratios: {}", r.encoder),
                    "|dz| / |dz0|",
                    &h.edges,
                    &h.counts,
                ),
            )?;
        }
    }
    Ok(written)
}
