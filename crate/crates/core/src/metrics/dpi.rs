//! Data-processing check on a Gaussian chain `z⁰ → x → z`.
//!
//! `z⁰ ~ N(0, I)`, `x = z⁰ + σ_x ε`, `z = x + σ_z ε'`. Both `I(z; z⁰)` and
//! `I(z; x)` have closed forms, so the estimator can be checked against the
//! ordering `I(z; z⁰) ≤ I(z; x)` and against the exact values.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mine::{mine_mi, MineConfig};
use super::oracle::{gaussian_channel_mi, gaussian_mi_oracle};
use super::PairedSamples;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpiConfig {
    pub dim: usize,
    pub observation_noise: f64,
    pub latent_noise: f64,
    pub samples: usize,
    pub mine: MineConfig,
}

impl Default for DpiConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            observation_noise: 1.0,
            latent_noise: 1.0,
            samples: 20_000,
            mine: MineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpiReport {
    pub oracle_latent_state: f64,
    pub oracle_latent_observation: f64,
    /// Per-seed `Î(z; z⁰)`.
    pub latent_state: Vec<f64>,
    /// Per-seed `Î(z; x)`.
    pub latent_observation: Vec<f64>,
    /// Larger of the two across-seed sample standard deviations.
    pub spread: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl DpiReport {
    pub fn mean_latent_state(&self) -> f64 {
        mean(&self.latent_state)
    }

    pub fn mean_latent_observation(&self) -> f64 {
        mean(&self.latent_observation)
    }

    /// `Î(z; z⁰) ≤ Î(z; x) + 2·spread`.
    pub fn ordering_holds(&self) -> bool {
        self.mean_latent_state() <= self.mean_latent_observation() + 2.0 * self.spread
    }

    /// Largest deviation of a mean estimate from its closed form.
    pub fn max_oracle_error(&self) -> f64 {
        (self.mean_latent_state() - self.oracle_latent_state)
            .abs()
            .max((self.mean_latent_observation() - self.oracle_latent_observation).abs())
    }
}

/// Estimate both mutual informations of the chain once per seed.
pub fn dpi_check(cfg: &DpiConfig, seeds: &[u64]) -> Result<DpiReport> {
    if seeds.len() < 2 {
        return Err(Error::invalid("the data-processing check needs at least two seeds"));
    }
    if cfg.dim == 0 || !(cfg.observation_noise >= 0.0) || !(cfg.latent_noise > 0.0) {
        return Err(Error::invalid("chain needs dim ≥ 1, σ_x ≥ 0 and σ_z > 0"));
    }
    let d = cfg.dim;
    let (sx, sz) = (cfg.observation_noise, cfg.latent_noise);
    let eye = DMatrix::<f64>::identity(d, d);
    let oracle_latent_observation = gaussian_mi_oracle(&eye, &(&eye * (1.0 + sx * sx)), sz)?;
    let oracle_latent_state = gaussian_channel_mi(&eye, &eye, &(&eye * (sx * sx + sz * sz)))?;

    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = SeededRng::new(derive_seed(seed, 0));
            let s = cfg.samples;
            let z0 = DMatrix::from_fn(s, d, |_, _| rng.normal());
            let x = DMatrix::from_fn(s, d, |r, c| z0[(r, c)] + sx * rng.normal());
            let z = DMatrix::from_fn(s, d, |r, c| x[(r, c)] + sz * rng.normal());
            let zs = mine_mi(&PairedSamples::new(z.clone(), z0)?, &cfg.mine, derive_seed(seed, 1))?;
            let zx = mine_mi(&PairedSamples::new(z, x)?, &cfg.mine, derive_seed(seed, 2))?;
            Ok((zs.mi, zx.mi))
        })
        .collect::<Result<Vec<_>>>()?;
    let (latent_state, latent_observation): (Vec<f64>, Vec<f64>) = runs.into_iter().unzip();
    Ok(DpiReport {
        oracle_latent_state,
        oracle_latent_observation,
        spread: sample_sd(&latent_state).max(sample_sd(&latent_observation)),
        latent_state,
        latent_observation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_observation_collapses_the_chain() {
        let cfg = DpiConfig {
            observation_noise: 0.0,
            samples: 512,
            mine: MineConfig {
                steps: 20,
                ..MineConfig::default()
            },
            ..DpiConfig::default()
        };
        let r = dpi_check(&cfg, &[1, 2]).unwrap();
        assert!((r.oracle_latent_state - r.oracle_latent_observation).abs() < 1e-15);
        assert_eq!(r.latent_state.len(), 2);
    }

    #[test]
    fn oracle_gap_grows_with_observation_noise() {
        let cfg = DpiConfig {
            observation_noise: 3.0,
            samples: 512,
            mine: MineConfig {
                steps: 10,
                ..MineConfig::default()
            },
            ..DpiConfig::default()
        };
        let r = dpi_check(&cfg, &[1, 2]).unwrap();
        assert!(r.oracle_latent_state < r.oracle_latent_observation - 0.5);
        assert!(dpi_check(&cfg, &[1]).is_err());
    }
}
