//! Regression probe: how well can a small MLP recover z⁰ from z?

use repmeter::encoders::EncoderSpec;
use repmeter::lagsim::{rollouts, ExplorationPolicy, SystemSpec};
use repmeter::metrics::{pair_samples, regression_probe, ProbeConfig};

pub fn main() -> repmeter::Result<()> {
    let spec = SystemSpec::pendulum(1.0, 1.0, 0.02);
    let policy = ExplorationPolicy::random(1, 2.0)?;
    let trues = rollouts(&spec, &policy, 200, 10, 3)
        .into_iter()
        .collect::<repmeter::Result<Vec<_>>>()?;
    let cfg = ProbeConfig {
        steps: 2000,
        ..ProbeConfig::default()
    };
    for enc in [
        EncoderSpec::identity(2),
        EncoderSpec::collapsing(2, &[1])?,
        EncoderSpec::noisy(EncoderSpec::identity(2), 0.5)?,
    ] {
        let latents: Vec<_> = trues
            .iter()
            .map(|t| enc.encode_trajectory(t, 1))
            .collect::<repmeter::Result<_>>()?;
        let r = regression_probe(&pair_samples(&latents, &trues)?, &cfg, 0)?;
        println!(
            "{:<22} validation error {:.4} per coordinate {:?}",
            enc.id,
            r.validation_error,
            r.per_coordinate.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
