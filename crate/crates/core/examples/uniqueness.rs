//! Entropy, smoothness bound and uniqueness score for a few encoders on
//! double-integrator data explored with a stabilising feedback policy.

use nalgebra::{DMatrix, DVector};
use repmeter::encoders::EncoderSpec;
use repmeter::lagsim::{rollouts, DifferenceOrder, ExplorationPolicy, SystemSpec};
use repmeter::metrics::{estimate_alpha, temporal_distance_profile, uniqueness_score};

pub fn main() -> repmeter::Result<()> {
    let spec = SystemSpec::double_integrator(2, 0.1)
        .with_initial_distribution(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let gain = DMatrix::from_row_slice(2, 4, &[-1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, -1.0]);
    let policy = ExplorationPolicy::gaussian(DVector::zeros(2), DMatrix::identity(2, 2) * 20.0)?.with_feedback(gain);
    let trues = rollouts(&spec, &policy, 300, 10, 5)
        .into_iter()
        .collect::<repmeter::Result<Vec<_>>>()?;
    let alpha = estimate_alpha(&trues, DifferenceOrder::Second)?;
    println!("α = {:.4} (anisotropy {:?})", alpha.alpha, alpha.anisotropy_ratio);

    let zoo = [
        EncoderSpec::identity(4),
        EncoderSpec::scaled(4, 0.1),
        EncoderSpec::folding(4, &[0, 1, 2, 3], 0.0)?,
        EncoderSpec::noisy(EncoderSpec::identity(4), 1.0)?,
    ];
    for enc in &zoo {
        let latents: Vec<_> = trues
            .iter()
            .map(|t| enc.encode_trajectory(t, 9))
            .collect::<repmeter::Result<_>>()?;
        let u = uniqueness_score(&latents, &trues, alpha.alpha, 5)?;
        let profile = temporal_distance_profile(&latents, &[1, 10, 50])?;
        let dists: Vec<String> = profile.iter().map(|p| format!("{:.3}", p.mean_distance)).collect();
        println!(
            "{:<22} H(z) {:>7.3}  bound {:>7.3}  score {:>7.3}  profile [{}]",
            enc.id,
            u.entropy,
            u.bound.unwrap_or(f64::NAN),
            u.score.unwrap_or(f64::NAN),
            dists.join(", ")
        );
    }
    Ok(())
}
