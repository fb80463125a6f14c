//! Synthetic encoders `z = g(z⁰)` with known Jacobians and ground-truth
//! uniqueness labels.

mod latent;
mod spec;

use std::collections::HashSet;
use std::path::Path;

pub use latent::{latent_from_table, latent_to_table, read_latent, write_latent, LatentTrajectory, LATENT_FORMAT};
pub use spec::{EncoderConfig, EncoderSpec, GroundTruth, LabelProvenance, LogAbsDet, FD_STEP};

use crate::error::{Error, Result};

/// Read a zoo file: a JSON list of encoder entries.
pub fn load_zoo(path: &Path) -> Result<Vec<EncoderConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Build every zoo entry for true states of dimension `input_dim`.
pub fn build_zoo(configs: &[EncoderConfig], input_dim: usize) -> Result<Vec<EncoderSpec>> {
    let mut seen = HashSet::new();
    configs
        .iter()
        .map(|cfg| {
            if !seen.insert(cfg.id.as_str()) {
                return Err(Error::Config(format!("duplicate encoder id `{}`", cfg.id)));
            }
            EncoderSpec::from_config(cfg, input_dim)
        })
        .collect()
}
