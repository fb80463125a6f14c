//! MINE on correlated Gaussian pairs against the closed form −½ ln(1 − ρ²).
//! Pass a step count to trade accuracy for time (default 20000).

use nalgebra::DMatrix;
use repmeter::metrics::{correlated_pair_mi, mine_mi, MineConfig, PairedSamples};
use repmeter::rng::SeededRng;

fn main() -> repmeter::Result<()> {
    let steps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let cfg = MineConfig {
        steps,
        ..MineConfig::default()
    };
    let mut rng = SeededRng::new(1);
    for rho in [0.0, 0.5, 0.9] {
        let x = DMatrix::from_fn(10_000, 1, |_, _| rng.normal());
        let y = DMatrix::from_fn(10_000, 1, |r, _| {
            rho * x[(r, 0)] + (1.0 - rho * rho).sqrt() * rng.normal()
        });
        let est = mine_mi(&PairedSamples::new(y, x)?, &cfg, 3)?;
        println!(
            "rho {rho:.1}: MINE {:.3} ± {:.3}, exact {:.3}",
            est.mi,
            est.window_std,
            correlated_pair_mi(rho)
        );
    }
    Ok(())
}
