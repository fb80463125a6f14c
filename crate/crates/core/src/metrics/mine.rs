//! Mutual information neural estimation (Donsker–Varadhan bound).
//!
//! A statistics network `T(z, z⁰)` is trained to maximise
//! `E_joint[T] − ln E_marginal[e^T]`. Marginal pairs come from pairing each
//! latent row with an independently drawn true-state row. The gradient of
//! the log-partition term is bias-corrected with an exponential moving
//! average of `E_marginal[e^T]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PairedSamples;
use crate::error::{Error, Result};
use crate::linalg::Standardizer;
use crate::nn::{AdamConfig, AdamState, Network};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MineConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the newest batch in the moving average of `E[e^T]`.
    pub moving_average: f64,
    pub steps: usize,
    /// Fraction of final steps whose DV values are averaged into the estimate.
    pub eval_fraction: f64,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            learning_rate: 5e-5,
            batch_size: 128,
            moving_average: 0.001,
            steps: 20_000,
            eval_fraction: 0.1,
        }
    }
}

impl MineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.batch_size == 0 || self.steps == 0 {
            return Err(Error::invalid("MINE widths, batch size and steps must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("MINE learning rate must be positive"));
        }
        if !(self.moving_average > 0.0 && self.moving_average < 1.0) {
            return Err(Error::invalid("MINE moving-average constant must lie in (0, 1)"));
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction <= 1.0) {
            return Err(Error::invalid("MINE evaluation fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    fn eval_window(&self) -> usize {
        ((self.steps as f64 * self.eval_fraction).round() as usize).clamp(1, self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineEstimate {
    /// Mean DV objective over the evaluation window, in nats.
    pub mi: f64,
    /// Standard deviation of the per-step DV values inside the window.
    pub window_std: f64,
    /// DV objective at every training step.
    pub trace: Vec<f64>,
    /// Set when the estimate is below zero; the value is reported unclamped.
    pub negative: bool,
}

/// Estimate `I(z; z⁰)` in nats. Both sides are standardised per coordinate
/// before training. Deterministic given `seed`.
pub fn mine_mi(samples: &PairedSamples, cfg: &MineConfig, seed: u64) -> Result<MineEstimate> {
    cfg.validate()?;
    let s = samples.len();
    if s < 2 * cfg.batch_size {
        return Err(Error::invalid(format!(
            "MINE needs at least {} samples (twice the batch size), got {s}",
            2 * cfg.batch_size
        )));
    }
    let z = Standardizer::fit(samples.latent()).transform(samples.latent());
    let x = Standardizer::fit(samples.state()).transform(samples.state());
    let (dz, dx) = (z.ncols(), x.ncols());

    let mut net = Network::new(&[dz + dx, cfg.hidden_width, cfg.hidden_width, 1], seed)?;
    let mut adam = AdamState::new(&net, AdamConfig::with_learning_rate(cfg.learning_rate))?;
    let mut rng = SeededRng::new(seed ^ 0x4d49_4e45);
    let b = cfg.batch_size;

    let mut joint = DMatrix::zeros(b, dz + dx);
    let mut marginal = DMatrix::zeros(b, dz + dx);
    let mut moving: Option<f64> = None;
    let mut trace = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let rows = rng.sample_indices(s, b);
        let shuffled = rng.sample_indices(s, b);
        for (r, (&i, &j)) in rows.iter().zip(&shuffled).enumerate() {
            for c in 0..dz {
                joint[(r, c)] = z[(i, c)];
                marginal[(r, c)] = z[(i, c)];
            }
            for c in 0..dx {
                joint[(r, dz + c)] = x[(i, c)];
                marginal[(r, dz + c)] = x[(j, c)];
            }
        }

        let joint_pass = net.forward(&joint)?;
        let marg_pass = net.forward(&marginal)?;
        let t_joint = joint_pass.output().column(0);
        let t_marg = marg_pass.output().column(0);

        let mean_joint = t_joint.mean();
        let max_m = t_marg.max();
        let sum_exp: f64 = t_marg.iter().map(|t| (t - max_m).exp()).sum();
        let log_mean_exp = max_m + (sum_exp / b as f64).ln();
        let dv = mean_joint - log_mean_exp;
        if !dv.is_finite() {
            return Err(Error::NumericFailureAt {
                step,
                reason: "non-finite Donsker-Varadhan objective".into(),
            });
        }
        trace.push(dv);

        let batch_mean_exp = log_mean_exp.exp();
        let ma = match moving {
            None => batch_mean_exp,
            Some(prev) => (1.0 - cfg.moving_average) * prev + cfg.moving_average * batch_mean_exp,
        };
        moving = Some(ma);

        // loss = -(mean T_joint - mean(e^T_marg) / ma), ma held constant
        let g_joint = DMatrix::from_element(b, 1, -1.0);
        let g_marg = DMatrix::from_iterator(b, 1, t_marg.iter().map(|t| t.exp() / ma));
        let mut grads = net.backward(&joint_pass, &g_joint)?;
        grads.add_assign(&net.backward(&marg_pass, &g_marg)?);
        if !grads.is_finite() {
            return Err(Error::NumericFailureAt {
                step,
                reason: "non-finite statistics-network gradient".into(),
            });
        }
        adam.step(&mut net, &grads)?;
    }

    let window = &trace[trace.len() - cfg.eval_window()..];
    let n = window.len() as f64;
    let mi = window.iter().sum::<f64>() / n;
    let window_std = if window.len() > 1 {
        (window.iter().map(|v| (v - mi).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MineEstimate {
        mi,
        window_std,
        trace,
        negative: mi < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> MineConfig {
        MineConfig {
            steps: 200,
            batch_size: 32,
            ..MineConfig::default()
        }
    }

    fn gaussian_pair(n: usize, rho: f64, seed: u64) -> PairedSamples {
        let mut rng = SeededRng::new(seed);
        let mut a = DMatrix::zeros(n, 1);
        let mut b = DMatrix::zeros(n, 1);
        for i in 0..n {
            let u = rng.normal();
            a[(i, 0)] = u;
            b[(i, 0)] = rho * u + (1.0 - rho * rho).sqrt() * rng.normal();
        }
        PairedSamples::new(a, b).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let data = gaussian_pair(300, 0.5, 1);
        let a = mine_mi(&data, &small_cfg(), 9).unwrap();
        let b = mine_mi(&data, &small_cfg(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), 200);
    }

    #[test]
    fn needs_two_batches_of_samples() {
        let data = gaussian_pair(300, 0.5, 1);
        let cfg = MineConfig {
            batch_size: 151,
            ..small_cfg()
        };
        assert!(matches!(mine_mi(&data, &cfg, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let data = gaussian_pair(300, 0.5, 1);
        for cfg in [
            MineConfig {
                moving_average: 1.0,
                ..small_cfg()
            },
            MineConfig {
                learning_rate: 0.0,
                ..small_cfg()
            },
            MineConfig {
                steps: 0,
                ..small_cfg()
            },
        ] {
            assert!(mine_mi(&data, &cfg, 0).is_err());
        }
    }

    #[test]
    fn diverging_training_reports_step() {
        let data = gaussian_pair(300, 0.99, 2);
        let cfg = MineConfig {
            learning_rate: 1e6,
            steps: 500,
            ..small_cfg()
        };
        match mine_mi(&data, &cfg, 0) {
            Err(Error::NumericFailureAt { step, .. }) => assert!(step < 500),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }
}
