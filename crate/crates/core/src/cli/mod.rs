//! Batch front-end: simulate, encode, evaluate, rank and report.
//!
//! Exit codes: 0 success, 2 config or input error, 3 corrupt data file,
//! 4 schema mismatch, 5 numeric failure.

mod commands;
mod config;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_encode, cmd_evaluate, cmd_rank, cmd_report, cmd_simulate, discover_reports, file_stem, latent_dir,
    load_reports, rank_reports, report_dir, trajectory_dir, DivergedRollout, RankKey, RankRow, SimulateSummary,
};
pub use config::{apply_env_overrides, ResolvedConfig, RunConfig, Source, ENV_PREFIX};

use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Debug, Parser)]
#[command(
    name = "repmeter",
    version,
    about = "Score state representations against known true states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out trajectories for every seed.
    Simulate(RunArgs),
    /// Apply every zoo encoder to the simulated trajectories.
    Encode(RunArgs),
    /// Compute metric reports for every encoder.
    Evaluate(RunArgs),
    /// Order reports by one metric.
    Rank(RankArgs),
    /// Draw SVG figures from reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated metric subset for `evaluate`.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Report files; defaults to every report under `<out>/reports`.
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// mi, regression-error or uniqueness-score.
    #[arg(long, default_value = "mi")]
    pub by: String,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report files; defaults to every report under `<out>/reports`.
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl RunArgs {
    /// Load the config file and apply command-line overrides.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut run = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            run.out = out.clone();
        }
        if let Some(seeds) = &self.seeds {
            run.seeds = seeds.clone();
        }
        if let Some(jobs) = self.jobs {
            run.jobs = Some(jobs);
        }
        if let Some(names) = &self.metrics {
            run.evaluation.metrics = names.iter().map(|n| n.parse()).collect::<Result<Vec<Metric>>>()?;
        }
        run.resolve()
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn reports_or_default(reports: &[PathBuf], out: &std::path::Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        discover_reports(out)
    } else {
        Ok(reports.to_vec())
    }
}

/// Execute one parsed command, printing a short summary to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            set_jobs(cfg.run.jobs)?;
            let summary = cmd_simulate(&cfg)?;
            for d in &summary.diverged {
                eprintln!("seed {} rollout {} diverged at step {}", d.seed, d.rollout, d.step);
            }
            println!("wrote {} trajectory files", summary.written.len());
        }
        Command::Encode(args) => {
            let cfg = args.resolve()?;
            set_jobs(cfg.run.jobs)?;
            println!("wrote {} latent files", cmd_encode(&cfg)?.len());
        }
        Command::Evaluate(args) => {
            let cfg = args.resolve()?;
            set_jobs(cfg.run.jobs)?;
            let requested = cfg.run.evaluation.metrics.len();
            let reports = cmd_evaluate(&cfg)?;
            for r in &reports {
                for f in &r.failures {
                    eprintln!("{}: {} failed: {}", r.encoder, f.metric, f.message);
                }
            }
            if !reports.is_empty() && reports.iter().all(|r| r.all_failed(requested)) {
                let code = reports[0].failures[0].exit_code;
                let msg = reports[0].failures[0].message.clone();
                return Err(match code {
                    2 => Error::invalid(msg),
                    _ => Error::numeric(msg),
                });
            }
            println!("wrote {} reports to {}", reports.len(), report_dir(cfg.out()).display());
        }
        Command::Rank(args) => {
            set_jobs(args.jobs)?;
            let key: RankKey = args.by.parse()?;
            let rows = cmd_rank(&reports_or_default(&args.reports, &args.out)?, key, &args.out)?;
            for r in rows {
                let value = r.value.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!("{:>3}  {:<32} {value}", r.rank, r.encoder);
            }
        }
        Command::Report(args) => {
            set_jobs(args.jobs)?;
            let written = cmd_report(&reports_or_default(&args.reports, &args.out)?, &args.out)?;
            println!("wrote {} plots", written.len());
        }
    }
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
