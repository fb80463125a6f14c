//! Regression probe: how well a small network recovers `z⁰` from `z`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::PairedSamples;
use crate::error::{Error, Result};
use crate::linalg::Standardizer;
use crate::nn::{AdamConfig, AdamState, Network};
use crate::rng::SeededRng;

const SPLIT_STREAM: u64 = 0x7072_6f62;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub validation_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            learning_rate: 1e-3,
            batch_size: 128,
            steps: 4000,
            validation_fraction: 0.3,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 || self.batch_size == 0 || self.steps == 0 {
            return Err(Error::invalid("probe widths, batch size and steps must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("probe learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Held-out mean squared error averaged over true-state coordinates, in
    /// standardized units.
    pub validation_error: f64,
    pub per_coordinate: Vec<f64>,
    pub train_error: f64,
    pub train_size: usize,
    pub validation_size: usize,
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

fn column_mse(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Vec<f64> {
    let n = pred.nrows() as f64;
    (pred - target).column_iter().map(|c| c.norm_squared() / n).collect()
}

/// Fit `ẑ⁰ = f̂(z)` with a `[d_z, w, w, 2k]` ReLU network on a seeded 70/30
/// split and report the held-out error. Inputs and targets are standardized
/// with training-split statistics.
pub fn regression_probe(samples: &PairedSamples, cfg: &ProbeConfig, seed: u64) -> Result<ProbeResult> {
    cfg.validate()?;
    let s = samples.len();
    if s < 500 {
        return Err(Error::invalid(format!("regression probe needs ≥ 500 samples, got {s}")));
    }
    let mut rng = SeededRng::new(seed ^ SPLIT_STREAM);
    let perm = rng.permutation(s);
    let n_val = ((s as f64) * cfg.validation_fraction).round() as usize;
    let (val_idx, train_idx) = perm.split_at(n_val);

    let x_train = select_rows(samples.latent(), train_idx);
    let y_train = select_rows(samples.state(), train_idx);
    let x_scaler = Standardizer::fit(&x_train);
    let y_scaler = Standardizer::fit(&y_train);
    let x_train = x_scaler.transform(&x_train);
    let y_train = y_scaler.transform(&y_train);
    let x_val = x_scaler.transform(&select_rows(samples.latent(), val_idx));
    let y_val = y_scaler.transform(&select_rows(samples.state(), val_idx));

    let (dz, dout) = (x_train.ncols(), y_train.ncols());
    let mut net = Network::new(&[dz, cfg.hidden_width, cfg.hidden_width, dout], seed)?;
    let mut adam = AdamState::new(&net, AdamConfig::with_learning_rate(cfg.learning_rate))?;
    let batch = cfg.batch_size.min(train_idx.len());
    for step in 0..cfg.steps {
        let rows = rng.sample_indices(train_idx.len(), batch);
        let xb = select_rows(&x_train, &rows);
        let yb = select_rows(&y_train, &rows);
        let pass = net.forward(&xb)?;
        let grad_out = (pass.output() - yb) * (2.0 / dout as f64);
        if !grad_out.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericFailureAt {
                step,
                reason: "probe loss is not finite".into(),
            });
        }
        let grads = net.backward(&pass, &grad_out)?;
        adam.step(&mut net, &grads)?;
    }

    let per_coordinate = column_mse(&net.predict(&x_val)?, &y_val);
    let train = column_mse(&net.predict(&x_train)?, &y_train);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let validation_error = mean(&per_coordinate);
    if !validation_error.is_finite() {
        return Err(Error::NumericFailureAt {
            step: cfg.steps,
            reason: "probe validation error is not finite".into(),
        });
    }
    Ok(ProbeResult {
        validation_error,
        train_error: mean(&train),
        per_coordinate,
        train_size: train_idx.len(),
        validation_size: n_val,
    })
}
