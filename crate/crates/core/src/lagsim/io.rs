//! Trajectory files.
//!
//! Metadata header keys: `format` (`"repmeter.trajectory"`), `version`,
//! `system`, `seed`, `policy`, `sample_time`, `q_dim`, `tau_dim`.
//! Columns, in this order: `t`, `q0..q{k-1}`, `qdot0..qdot{k-1}`,
//! `tau0..tau{m-1}`. The last row leaves the torque fields empty.

use std::path::Path;

use nalgebra::DVector;
use serde_json::json;

use super::sim::{State, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::table::Table;

pub const TRAJECTORY_FORMAT: &str = "repmeter.trajectory";
pub const FORMAT_VERSION: u64 = 1;

pub fn trajectory_columns(k: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..k).map(|i| format!("q{i}")));
    cols.extend((0..k).map(|i| format!("qdot{i}")));
    cols.extend((0..m).map(|i| format!("tau{i}")));
    cols
}

pub fn trajectory_to_table(traj: &Trajectory) -> Table {
    let (k, m) = (traj.config_dim(), traj.input_dim());
    let header = json!({
        "format": TRAJECTORY_FORMAT,
        "version": FORMAT_VERSION,
        "system": traj.meta.system,
        "seed": traj.meta.seed,
        "policy": traj.meta.policy,
        "sample_time": traj.sample_time,
        "q_dim": k,
        "tau_dim": m,
    });
    let rows = traj
        .states
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let mut row = Vec::with_capacity(1 + 2 * k + m);
            row.push(Some(n as f64 * traj.sample_time));
            row.extend(s.q.iter().map(|&v| Some(v)));
            row.extend(s.qdot.iter().map(|&v| Some(v)));
            match traj.torques.get(n) {
                Some(tau) => row.extend(tau.iter().map(|&v| Some(v))),
                None => row.extend(std::iter::repeat_n(None, m)),
            }
            row
        })
        .collect();
    Table {
        header,
        columns: trajectory_columns(k, m),
        rows,
    }
}

pub(crate) fn header_usize(table: &Table, key: &str, path: &Path) -> Result<usize> {
    table.header[key]
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("metadata header lacks integer `{key}`"),
        })
}

pub(crate) fn check_format(table: &Table, format: &str, path: &Path) -> Result<()> {
    if table.header["format"].as_str() != Some(format) {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected format `{format}`"),
        });
    }
    match table.header["version"].as_u64() {
        Some(FORMAT_VERSION) => Ok(()),
        other => Err(Error::SchemaMismatch(format!(
            "{}: file version {:?}, reader supports {FORMAT_VERSION}",
            path.display(),
            other
        ))),
    }
}

pub fn trajectory_from_table(table: &Table, path: &Path) -> Result<Trajectory> {
    check_format(table, TRAJECTORY_FORMAT, path)?;
    let k = header_usize(table, "q_dim", path)?;
    let m = header_usize(table, "tau_dim", path)?;
    let corrupt = |line: u64, reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        line,
        reason,
    };
    if table.columns != trajectory_columns(k, m) {
        return Err(corrupt(2, "column header does not match q_dim/tau_dim".into()));
    }
    if table.rows.is_empty() {
        return Err(corrupt(3, "no data rows".into()));
    }
    let n = table.rows.len();
    let mut states = Vec::with_capacity(n);
    let mut torques = Vec::with_capacity(n - 1);
    for (r, row) in table.rows.iter().enumerate() {
        let line = r as u64 + 3;
        let value = |c: usize| row[c].ok_or_else(|| corrupt(line, format!("empty `{}`", table.columns[c])));
        let q = (0..k).map(|i| value(1 + i)).collect::<Result<Vec<_>>>()?;
        let qdot = (0..k).map(|i| value(1 + k + i)).collect::<Result<Vec<_>>>()?;
        states.push(State::new(DVector::from_vec(q), DVector::from_vec(qdot)));
        if r + 1 < n {
            let tau = (0..m).map(|i| value(1 + 2 * k + i)).collect::<Result<Vec<_>>>()?;
            torques.push(DVector::from_vec(tau));
        }
    }
    let meta = TrajectoryMeta {
        system: table.header["system"].as_str().unwrap_or_default().to_string(),
        seed: table.header["seed"].as_u64().unwrap_or_default(),
        policy: table.header["policy"].as_str().unwrap_or_default().to_string(),
    };
    let sample_time = table.header["sample_time"]
        .as_f64()
        .ok_or_else(|| corrupt(1, "metadata header lacks `sample_time`".into()))?;
    Trajectory::new(states, torques, sample_time, meta)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    trajectory_to_table(traj).write(path)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    trajectory_from_table(&Table::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagsim::{rollout, ExplorationPolicy, SystemSpec};

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SystemSpec::two_link_arm(0.01)
            .with_initial_distribution(vec![0.0, 0.0], vec![vec![0.2, 0.0], vec![0.0, 0.2]]);
        let traj = rollout(&spec, &ExplorationPolicy::random(2, 1.0).unwrap(), 25, 4).unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory(&path, &traj).unwrap();
        assert_eq!(read_trajectory(&path).unwrap(), traj);

        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('{'));
        assert_eq!(lines.next().unwrap(), "t,q0,q1,qdot0,qdot1,tau0,tau1");
        assert!(text.lines().last().unwrap().ends_with(",,"));
    }

    #[test]
    fn version_mismatch_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SystemSpec::double_integrator(1, 0.05);
        let traj = rollout(&spec, &ExplorationPolicy::random(1, 1.0).unwrap(), 5, 0).unwrap();
        let mut table = trajectory_to_table(&traj);
        table.header["version"] = json!(7);
        let path = dir.path().join("t.csv");
        table.write(&path).unwrap();
        assert!(matches!(read_trajectory(&path), Err(Error::SchemaMismatch(_))));
    }
}
