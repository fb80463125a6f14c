use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment accumulators for bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Network, config: AdamConfig) -> Result<Self> {
        let ok = config.learning_rate > 0.0
            && config.epsilon > 0.0
            && (0.0..1.0).contains(&config.beta1)
            && config.beta1 > 0.0
            && (0.0..1.0).contains(&config.beta2)
            && config.beta2 > 0.0;
        if !ok {
            return Err(Error::invalid(format!("invalid Adam configuration {config:?}")));
        }
        Ok(Self {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if !net.gradients_match(grads) || !net.gradients_match(&self.first) {
            return Err(Error::invalid("gradient shapes do not match the network"));
        }
        if !grads.is_finite() {
            return Err(Error::NumericFailureAt {
                step: self.step as usize,
                reason: "non-finite gradient".into(),
            });
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        for i in 0..grads.weights.len() {
            let pairs = self.first.weights[i]
                .iter_mut()
                .zip(self.second.weights[i].iter_mut())
                .zip(grads.weights[i].iter())
                .chain(
                    self.first.biases[i]
                        .iter_mut()
                        .zip(self.second.biases[i].iter_mut())
                        .zip(grads.biases[i].iter()),
                );
            for ((m, v), &g) in pairs {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
            }
        }

        let (first, second) = (&self.first, &self.second);
        net.apply_update(|layer, is_bias, k, p| {
            let (m, v) = if is_bias {
                (first.biases[layer][k], second.biases[layer][k])
            } else {
                (first.weights[layer][k], second.weights[layer][k])
            };
            let m_hat = m / c1;
            let v_hat = v / c2;
            p - learning_rate * m_hat / (v_hat.sqrt() + epsilon)
        });
        Ok(())
    }
}
