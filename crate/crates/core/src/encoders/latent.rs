//! Latent trajectories and their files.
//!
//! Metadata header keys: `format` (`"repmeter.latent"`), `version`,
//! `encoder`, `source_seed`, `noise_seed`, `sample_time`, `z_dim`.
//! Columns: `t`, `z0..z{d-1}`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use super::spec::EncoderSpec;
use crate::error::{Error, Result};
use crate::lagsim::{check_format, header_usize, Trajectory};
use crate::rng::SeededRng;
use crate::table::Table;

pub const LATENT_FORMAT: &str = "repmeter.latent";

/// Encoded states `z_0 … z_N` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub latents: Vec<DVector<f64>>,
    pub sample_time: f64,
    pub encoder: String,
    /// Seed of the trajectory that was encoded.
    pub source_seed: u64,
    /// Seed of the encoder noise stream.
    pub noise_seed: u64,
}

impl LatentTrajectory {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.latents.first().map_or(0, |z| z.len())
    }

    /// `N×d` matrix with one latent per row.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(self.len(), d, |r, c| self.latents[r][c])
    }
}

impl EncoderSpec {
    /// Encode every state of `traj`; noise draws come from one stream seeded
    /// by `seed`, consumed in time order.
    pub fn encode_trajectory(&self, traj: &Trajectory, seed: u64) -> Result<LatentTrajectory> {
        let mut rng = SeededRng::new(seed);
        let latents = (0..traj.len())
            .map(|n| self.encode_with(&traj.z(n), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentTrajectory {
            latents,
            sample_time: traj.sample_time,
            encoder: self.id.clone(),
            source_seed: traj.meta.seed,
            noise_seed: seed,
        })
    }
}

pub fn latent_to_table(lat: &LatentTrajectory) -> Table {
    let d = lat.dim();
    let mut columns = vec!["t".to_string()];
    columns.extend((0..d).map(|i| format!("z{i}")));
    let rows = lat
        .latents
        .iter()
        .enumerate()
        .map(|(n, z)| {
            std::iter::once(Some(n as f64 * lat.sample_time))
                .chain(z.iter().map(|&v| Some(v)))
                .collect()
        })
        .collect();
    Table {
        header: json!({
            "format": LATENT_FORMAT,
            "version": crate::lagsim::FORMAT_VERSION,
            "encoder": lat.encoder,
            "source_seed": lat.source_seed,
            "noise_seed": lat.noise_seed,
            "sample_time": lat.sample_time,
            "z_dim": d,
        }),
        columns,
        rows,
    }
}

pub fn latent_from_table(table: &Table, path: &Path) -> Result<LatentTrajectory> {
    check_format(table, LATENT_FORMAT, path)?;
    let d = header_usize(table, "z_dim", path)?;
    let corrupt = |line: u64, reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((0..d).map(|i| format!("z{i}")))
        .collect();
    if table.columns != expected {
        return Err(corrupt(2, "column header does not match z_dim".into()));
    }
    let latents = table
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row[1..]
                .iter()
                .map(|v| v.ok_or_else(|| corrupt(r as u64 + 3, "empty latent field".into())))
                .collect::<Result<Vec<_>>>()
                .map(DVector::from_vec)
        })
        .collect::<Result<Vec<_>>>()?;
    let sample_time = table.header["sample_time"]
        .as_f64()
        .ok_or_else(|| corrupt(1, "metadata header lacks `sample_time`".into()))?;
    Ok(LatentTrajectory {
        latents,
        sample_time,
        encoder: table.header["encoder"].as_str().unwrap_or_default().to_string(),
        source_seed: table.header["source_seed"].as_u64().unwrap_or_default(),
        noise_seed: table.header["noise_seed"].as_u64().unwrap_or_default(),
    })
}

pub fn write_latent(path: &Path, lat: &LatentTrajectory) -> Result<()> {
    latent_to_table(lat).write(path)
}

pub fn read_latent(path: &Path) -> Result<LatentTrajectory> {
    latent_from_table(&Table::read(path)?, path)
}
