//! Data-processing check on the chain z⁰ → x → z with Gaussian noise:
//! I(z; z⁰) must not exceed I(z; x).

use repmeter::metrics::{dpi_check, DpiConfig, MineConfig};

fn main() -> repmeter::Result<()> {
    let cfg = DpiConfig {
        samples: 10_000,
        mine: MineConfig {
            steps: 5000,
            ..MineConfig::default()
        },
        ..DpiConfig::default()
    };
    let r = dpi_check(&cfg, &[0, 1, 2])?;
    println!(
        "I(z; x)  = {:.3} (exact {:.3})",
        r.mean_latent_observation(),
        r.oracle_latent_observation
    );
    println!(
        "I(z; z0) = {:.3} (exact {:.3})",
        r.mean_latent_state(),
        r.oracle_latent_state
    );
    println!("seed spread {:.3}, ordering holds: {}", r.spread, r.ordering_holds());
    Ok(())
}
