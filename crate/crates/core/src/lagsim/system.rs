use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, psd_factor};

/// Closed-form Lagrangian models `M(q) q̈ + C(q, q̇) = B(q) τ`, written in
/// already-reduced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemModel {
    /// `dim` independent unit-free point masses: `M = mI`, `C = 0`, `B = I`.
    DoubleIntegrator {
        dim: usize,
        #[serde(default = "unit")]
        mass: f64,
    },
    /// Point-mass pendulum, `q` measured from the downward vertical:
    /// `M = m l²`, `C = m g l sin q`, `B = 1`.
    Pendulum {
        mass: f64,
        length: f64,
        #[serde(default = "standard_gravity")]
        gravity: f64,
    },
    /// Planar two-link arm of uniform rods, joint torques on both joints,
    /// `q₁` measured from the horizontal.
    TwoLinkArm {
        masses: [f64; 2],
        lengths: [f64; 2],
        #[serde(default = "standard_gravity")]
        gravity: f64,
    },
}

fn unit() -> f64 {
    1.0
}

fn standard_gravity() -> f64 {
    9.81
}

impl SystemModel {
    pub fn name(&self) -> &'static str {
        match self {
            SystemModel::DoubleIntegrator { .. } => "double-integrator",
            SystemModel::Pendulum { .. } => "pendulum",
            SystemModel::TwoLinkArm { .. } => "two-link-arm",
        }
    }

    /// Dimension `k` of the configuration `q`.
    pub fn config_dim(&self) -> usize {
        match self {
            SystemModel::DoubleIntegrator { dim, .. } => *dim,
            SystemModel::Pendulum { .. } => 1,
            SystemModel::TwoLinkArm { .. } => 2,
        }
    }

    /// Dimension `m` of the torque input.
    pub fn input_dim(&self) -> usize {
        self.config_dim()
    }

    /// Inertia matrix `M(q)`.
    pub fn inertia(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match *self {
            SystemModel::DoubleIntegrator { dim, mass } => DMatrix::identity(dim, dim) * mass,
            SystemModel::Pendulum { mass, length, .. } => DMatrix::from_element(1, 1, mass * length * length),
            SystemModel::TwoLinkArm {
                masses: [m1, m2],
                lengths: [l1, l2],
                ..
            } => {
                let (lc1, lc2) = (l1 / 2.0, l2 / 2.0);
                let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
                let c2 = q[1].cos();
                let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2) + i1 + i2;
                let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
                let m22 = m2 * lc2 * lc2 + i2;
                DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
            }
        }
    }

    /// Coriolis, centrifugal and gravity terms `C(q, q̇)`.
    pub fn bias_forces(&self, q: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
        match *self {
            SystemModel::DoubleIntegrator { dim, .. } => DVector::zeros(dim),
            SystemModel::Pendulum { mass, length, gravity } => {
                DVector::from_element(1, mass * gravity * length * q[0].sin())
            }
            SystemModel::TwoLinkArm {
                masses: [m1, m2],
                lengths: [l1, l2],
                gravity,
            } => {
                let (lc1, lc2) = (l1 / 2.0, l2 / 2.0);
                let h = m2 * l1 * lc2 * q[1].sin();
                let coriolis1 = -h * (2.0 * qdot[0] * qdot[1] + qdot[1] * qdot[1]);
                let coriolis2 = h * qdot[0] * qdot[0];
                let g1 = (m1 * lc1 + m2 * l1) * gravity * q[0].cos() + m2 * lc2 * gravity * (q[0] + q[1]).cos();
                let g2 = m2 * lc2 * gravity * (q[0] + q[1]).cos();
                DVector::from_row_slice(&[coriolis1 + g1, coriolis2 + g2])
            }
        }
    }

    /// Input map `B(q)`.
    pub fn input_map(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let k = self.config_dim();
        DMatrix::identity(k, k)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("system.model.{name} must be positive, got {v}")))
            }
        };
        match *self {
            SystemModel::DoubleIntegrator { dim, mass } => {
                if dim == 0 {
                    return Err(Error::Config("system.model.dim must be at least 1".into()));
                }
                positive(mass, "mass")
            }
            SystemModel::Pendulum { mass, length, gravity } => {
                positive(mass, "mass")?;
                positive(length, "length")?;
                if gravity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("system.model.gravity must be finite".into()))
                }
            }
            SystemModel::TwoLinkArm {
                masses,
                lengths,
                gravity,
            } => {
                masses.iter().try_for_each(|&m| positive(m, "masses"))?;
                lengths.iter().try_for_each(|&l| positive(l, "lengths"))?;
                if gravity.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("system.model.gravity must be finite".into()))
                }
            }
        }
    }
}

/// A Lagrangian system together with its sampling and initial-condition
/// distribution `q₀ ~ N(mean, covariance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub model: SystemModel,
    /// Sample time `T_s` in seconds.
    pub sample_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0_covariance: Option<Vec<Vec<f64>>>,
    /// Drop `C(q, q̇)` from the dynamics, as if a controller cancelled it.
    #[serde(default)]
    pub compensate_coriolis: bool,
}

impl SystemSpec {
    pub fn new(model: SystemModel, sample_time: f64) -> Self {
        Self {
            model,
            sample_time,
            q0_mean: None,
            q0_covariance: None,
            compensate_coriolis: false,
        }
    }

    pub fn double_integrator(dim: usize, sample_time: f64) -> Self {
        Self::new(SystemModel::DoubleIntegrator { dim, mass: 1.0 }, sample_time)
    }

    pub fn pendulum(mass: f64, length: f64, sample_time: f64) -> Self {
        Self::new(
            SystemModel::Pendulum {
                mass,
                length,
                gravity: standard_gravity(),
            },
            sample_time,
        )
    }

    pub fn two_link_arm(sample_time: f64) -> Self {
        Self::new(
            SystemModel::TwoLinkArm {
                masses: [1.0, 1.0],
                lengths: [1.0, 1.0],
                gravity: standard_gravity(),
            },
            sample_time,
        )
    }

    pub fn with_initial_distribution(mut self, mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Self {
        self.q0_mean = Some(mean);
        self.q0_covariance = Some(covariance);
        self
    }

    pub fn with_compensation(mut self, compensate: bool) -> Self {
        self.compensate_coriolis = compensate;
        self
    }

    pub fn config_dim(&self) -> usize {
        self.model.config_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    /// Dimension `2k` of the true state `[q, q̇]`.
    pub fn state_dim(&self) -> usize {
        2 * self.config_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::Config(format!(
                "system.sample_time must be positive, got {}",
                self.sample_time
            )));
        }
        let k = self.config_dim();
        if let Some(mean) = &self.q0_mean {
            if mean.len() != k {
                return Err(Error::Config(format!(
                    "system.q0_mean has {} entries, expected {k}",
                    mean.len()
                )));
            }
        }
        if self.q0_covariance.is_some() {
            self.initial_factor()
                .map_err(|e| Error::Config(format!("system.q0_covariance: {e}")))?;
        }
        Ok(())
    }

    pub(crate) fn initial_mean(&self) -> DVector<f64> {
        match &self.q0_mean {
            Some(m) => DVector::from_column_slice(m),
            None => DVector::zeros(self.config_dim()),
        }
    }

    pub(crate) fn initial_factor(&self) -> Result<DMatrix<f64>> {
        let k = self.config_dim();
        match &self.q0_covariance {
            None => Ok(DMatrix::zeros(k, k)),
            Some(rows) => {
                let cov = matrix_from_rows(rows)?;
                if cov.shape() != (k, k) {
                    return Err(Error::invalid(format!("expected a {k}x{k} covariance")));
                }
                psd_factor(&cov)
            }
        }
    }

    /// Inertia matrix at `q`, checked symmetric positive definite.
    pub fn inertia_cholesky(&self, q: &DVector<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let m = self.model.inertia(q);
        nalgebra::Cholesky::new(m).ok_or_else(|| {
            Error::numeric(format!(
                "inertia matrix is not positive definite at q = {}",
                q.transpose()
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_link_inertia_is_spd_and_symmetric() {
        let spec = SystemSpec::two_link_arm(0.01);
        for &(a, b) in &[(0.0, 0.0), (1.0, -2.0), (3.0, 3.1)] {
            let q = DVector::from_row_slice(&[a, b]);
            let m = spec.model.inertia(&q);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            assert!(spec.inertia_cholesky(&q).is_ok());
        }
    }

    #[test]
    fn validation_names_field() {
        let mut spec = SystemSpec::double_integrator(2, 0.05);
        spec.sample_time = -1.0;
        let msg = spec.validate().unwrap_err().to_string();
        assert!(msg.contains("sample_time"), "{msg}");

        let spec = SystemSpec::double_integrator(2, 0.05).with_initial_distribution(vec![0.0], vec![vec![1.0]]);
        assert!(spec.validate().unwrap_err().to_string().contains("q0_mean"));
    }

    #[test]
    fn json_round_trip() {
        let spec = SystemSpec::pendulum(1.0, 0.5, 0.02).with_initial_distribution(vec![0.1], vec![vec![0.04]]);
        let text = serde_json::to_string(&spec).unwrap();
        let back: SystemSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let parsed: SystemSpec =
            serde_json::from_str(r#"{"model":{"kind":"double-integrator","dim":3},"sample_time":0.05}"#).unwrap();
        assert_eq!(parsed.state_dim(), 6);
    }
}
