//! Evaluate a zoo in memory with two seeds and rank it by each key.

use nalgebra::{DMatrix, DVector};
use repmeter::cli::{rank_reports, RankKey};
use repmeter::encoders::EncoderSpec;
use repmeter::lagsim::{rollouts, DifferenceOrder, ExplorationPolicy, SystemSpec};
use repmeter::metrics::{estimate_alpha, evaluate, EvaluationConfig, Metric, MineConfig, ProbeConfig};

fn main() -> repmeter::Result<()> {
    let spec = SystemSpec::double_integrator(2, 0.1)
        .with_initial_distribution(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let gain = DMatrix::from_row_slice(2, 4, &[-1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, -1.0]);
    let policy = ExplorationPolicy::gaussian(DVector::zeros(2), DMatrix::identity(2, 2) * 20.0)?.with_feedback(gain);
    let trues = rollouts(&spec, &policy, 200, 8, 21)
        .into_iter()
        .collect::<repmeter::Result<Vec<_>>>()?;
    let alpha = estimate_alpha(&trues, DifferenceOrder::Second)?.alpha;
    let cfg = EvaluationConfig {
        metrics: vec![Metric::Mine, Metric::Uniqueness, Metric::Regression],
        mine: MineConfig {
            steps: 2000,
            ..MineConfig::default()
        },
        probe: ProbeConfig {
            steps: 1500,
            ..ProbeConfig::default()
        },
        ..EvaluationConfig::default()
    };
    let zoo = [
        EncoderSpec::identity(4),
        EncoderSpec::collapsing(4, &[2, 3])?,
        EncoderSpec::folding(4, &[0, 1, 2, 3], 0.0)?,
        EncoderSpec::noisy(EncoderSpec::identity(4), 1.0)?,
    ];
    let mut reports = Vec::new();
    for enc in &zoo {
        let latents: Vec<_> = trues
            .iter()
            .map(|t| enc.encode_trajectory(t, 8))
            .collect::<repmeter::Result<_>>()?;
        reports.push(evaluate(&latents, &trues, Some(alpha), &cfg, &[0, 1])?.with_encoder(enc));
    }
    for key in [RankKey::Mi, RankKey::RegressionError, RankKey::UniquenessScore] {
        println!("by {}:", key.name());
        for row in rank_reports(&reports, key)? {
            let value = row.value.map_or("-".into(), |v| format!("{v:.3}"));
            let spread = row.spread.map_or(String::new(), |s| format!(" ± {s:.3}"));
            println!("  {}. {:<22} {value}{spread}", row.rank, row.encoder);
        }
    }
    Ok(())
}
