use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::system::SystemSpec;
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, psd_factor};
use crate::rng::SeededRng;

const DIVERGENCE_LIMIT: f64 = 1e9;

/// True state `z⁰ = [q, q̇]`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let k = q.len();
        Self {
            q,
            qdot: DVector::zeros(k),
        }
    }

    /// Concatenated `[q, q̇]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let k = self.q.len();
        DVector::from_fn(2 * k, |i, _| if i < k { self.q[i] } else { self.qdot[i - k] })
    }

    pub fn from_vector(z: &DVector<f64>) -> Result<Self> {
        if z.len() % 2 != 0 {
            return Err(Error::invalid("true-state vector must have even length"));
        }
        let k = z.len() / 2;
        Ok(Self {
            q: z.rows(0, k).into_owned(),
            qdot: z.rows(k, k).into_owned(),
        })
    }

    fn max_abs(&self) -> f64 {
        self.q.iter().chain(self.qdot.iter()).fold(0.0, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: String,
    pub seed: u64,
    pub policy: String,
}

/// States `z⁰_0 … z⁰_N` and the torques `τ_0 … τ_{N-1}` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub torques: Vec<DVector<f64>>,
    pub sample_time: f64,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(states: Vec<State>, torques: Vec<DVector<f64>>, sample_time: f64, meta: TrajectoryMeta) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("trajectory needs at least one state"));
        }
        if torques.len() + 1 != states.len() {
            return Err(Error::invalid(format!(
                "{} states need {} torques, got {}",
                states.len(),
                states.len() - 1,
                torques.len()
            )));
        }
        Ok(Self {
            states,
            torques,
            sample_time,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn config_dim(&self) -> usize {
        self.states[0].q.len()
    }

    pub fn input_dim(&self) -> usize {
        self.torques.first().map_or(0, |t| t.len())
    }

    /// True state at step `n` as `[q, q̇]`.
    pub fn z(&self, n: usize) -> DVector<f64> {
        self.states[n].to_vector()
    }

    /// All states as an `N×2k` matrix.
    pub fn state_matrix(&self) -> DMatrix<f64> {
        let k2 = 2 * self.config_dim();
        let mut m = DMatrix::zeros(self.len(), k2);
        for (i, s) in self.states.iter().enumerate() {
            m.row_mut(i).copy_from(&s.to_vector().transpose());
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Schedule<T> {
    Constant(T),
    PerStep(Vec<T>),
}

impl<T> Schedule<T> {
    fn at(&self, n: usize) -> Option<&T> {
        match self {
            Schedule::Constant(v) => Some(v),
            Schedule::PerStep(v) => v.get(n),
        }
    }

    fn covers(&self, steps: usize) -> bool {
        match self {
            Schedule::Constant(_) => true,
            Schedule::PerStep(v) => v.len() >= steps,
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            Schedule::Constant(v) => Box::new(std::iter::once(v)),
            Schedule::PerStep(v) => Box::new(v.iter()),
        }
    }
}

/// Gaussian exploration `τ_n ~ N(π_n + K z⁰_n, Σ_n)`; the feedback gain `K`
/// is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationPolicy {
    mean: Schedule<DVector<f64>>,
    covariance: Schedule<DMatrix<f64>>,
    factor: Schedule<DMatrix<f64>>,
    feedback: Option<DMatrix<f64>>,
    pub id: String,
}

impl ExplorationPolicy {
    /// Constant mean and covariance.
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(Error::invalid("policy covariance must be m×m"));
        }
        let factor = psd_factor(&covariance)?;
        Ok(Self {
            mean: Schedule::Constant(mean),
            covariance: Schedule::Constant(covariance),
            factor: Schedule::Constant(factor),
            feedback: None,
            id: "gaussian".into(),
        })
    }

    /// Zero-mean isotropic random exploration `τ ~ N(0, σ² I)`.
    pub fn random(input_dim: usize, sigma: f64) -> Result<Self> {
        let mut p = Self::gaussian(
            DVector::zeros(input_dim),
            DMatrix::identity(input_dim, input_dim) * (sigma * sigma),
        )?;
        p.id = format!("random(sigma={sigma})");
        Ok(p)
    }

    /// Per-step means and covariances, one per transition.
    pub fn scheduled(means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        if means.len() != covariances.len() || means.is_empty() {
            return Err(Error::invalid(
                "mean and covariance schedules must have equal, nonzero length",
            ));
        }
        let m = means[0].len();
        if means.iter().any(|v| v.len() != m) || covariances.iter().any(|c| c.shape() != (m, m)) {
            return Err(Error::invalid("inconsistent schedule dimensions"));
        }
        let factors = covariances.iter().map(psd_factor).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mean: Schedule::PerStep(means),
            covariance: Schedule::PerStep(covariances),
            factor: Schedule::PerStep(factors),
            feedback: None,
            id: "scheduled".into(),
        })
    }

    /// Add a linear state feedback `K z⁰_n` (`K` is `m×2k`) to the mean.
    pub fn with_feedback(mut self, gain: DMatrix<f64>) -> Self {
        self.feedback = Some(gain);
        self.id = format!("{}+feedback", self.id);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn input_dim(&self) -> usize {
        self.mean.at(0).map_or(0, |m| m.len())
    }

    pub fn mean_at(&self, n: usize) -> Option<&DVector<f64>> {
        self.mean.at(n)
    }

    pub fn covariance_at(&self, n: usize) -> Option<&DMatrix<f64>> {
        self.covariance.at(n)
    }

    fn check(&self, spec: &SystemSpec, transitions: usize) -> Result<()> {
        let m = spec.input_dim();
        if self.mean.values().any(|v| v.len() != m) {
            return Err(Error::invalid(format!("policy mean must have {m} entries")));
        }
        if !self.mean.covers(transitions) || !self.factor.covers(transitions) {
            return Err(Error::invalid(format!(
                "policy schedule does not cover {transitions} transitions"
            )));
        }
        if let Some(k) = &self.feedback {
            if k.shape() != (m, spec.state_dim()) {
                return Err(Error::invalid(format!(
                    "feedback gain must be {m}x{}",
                    spec.state_dim()
                )));
            }
        }
        Ok(())
    }

    fn sample(&self, n: usize, state: &State, rng: &mut SeededRng) -> DVector<f64> {
        let mean = self.mean.at(n).expect("checked schedule");
        let factor = self.factor.at(n).expect("checked schedule");
        let eps = DVector::from_vec(rng.normal_vec(factor.ncols()));
        let mut tau = mean + factor * eps;
        if let Some(k) = &self.feedback {
            tau += k * state.to_vector();
        }
        tau
    }
}

/// Serializable description of an [`ExplorationPolicy`] with constant mean
/// and covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_gain: Option<Vec<Vec<f64>>>,
}

impl PolicySpec {
    pub fn build(&self) -> Result<ExplorationPolicy> {
        let cov = matrix_from_rows(&self.covariance).map_err(|e| Error::Config(format!("policy.covariance: {e}")))?;
        let mut policy = ExplorationPolicy::gaussian(DVector::from_column_slice(&self.mean), cov)
            .map_err(|e| Error::Config(format!("policy.covariance: {e}")))?;
        if let Some(gain) = &self.feedback_gain {
            let k = matrix_from_rows(gain).map_err(|e| Error::Config(format!("policy.feedback_gain: {e}")))?;
            policy = policy.with_feedback(k);
        }
        Ok(policy)
    }
}

/// One explicit Euler step:
/// `q⁺ = q + T_s q̇`, `q̇⁺ = q̇ + T_s M(q)⁻¹(−C(q, q̇) + B(q) τ)`,
/// with `C` dropped when the spec compensates it.
pub fn euler_step(state: &State, tau: &DVector<f64>, spec: &SystemSpec) -> Result<State> {
    let k = spec.config_dim();
    if state.q.len() != k || state.qdot.len() != k {
        return Err(Error::invalid(format!("state must have configuration dimension {k}")));
    }
    if tau.len() != spec.input_dim() {
        return Err(Error::invalid(format!(
            "torque must have {} entries, got {}",
            spec.input_dim(),
            tau.len()
        )));
    }
    let ts = spec.sample_time;
    let chol = spec.inertia_cholesky(&state.q)?;
    let mut force = spec.model.input_map(&state.q) * tau;
    if !spec.compensate_coriolis {
        force -= spec.model.bias_forces(&state.q, &state.qdot);
    }
    let accel = chol.solve(&force);
    Ok(State {
        q: &state.q + &state.qdot * ts,
        qdot: &state.qdot + accel * ts,
    })
}

/// Effective discrete input map `B̃ = T_s M(q)⁻¹ B(q)`.
pub fn tilde_b(spec: &SystemSpec, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    if q.len() != spec.config_dim() {
        return Err(Error::invalid("configuration has the wrong dimension"));
    }
    let chol = spec.inertia_cholesky(q)?;
    Ok(chol.solve(&spec.model.input_map(q)) * spec.sample_time)
}

/// Simulate `n_states` states from `q₀ ~ p(q₀)`, `q̇₀ = 0`, drawing one torque
/// per transition from `policy`. A pure function of its arguments.
pub fn rollout(spec: &SystemSpec, policy: &ExplorationPolicy, n_states: usize, seed: u64) -> Result<Trajectory> {
    if n_states < 2 {
        return Err(Error::invalid("a rollout needs at least two states"));
    }
    spec.validate()?;
    policy.check(spec, n_states - 1)?;
    let mut rng = SeededRng::new(seed);

    let factor = spec.initial_factor()?;
    let eps = DVector::from_vec(rng.normal_vec(spec.config_dim()));
    let mut state = State::at_rest(spec.initial_mean() + factor * eps);

    let mut states = Vec::with_capacity(n_states);
    let mut torques = Vec::with_capacity(n_states - 1);
    for n in 0..n_states - 1 {
        let tau = policy.sample(n, &state, &mut rng);
        let next = euler_step(&state, &tau, spec)?;
        let blown = next.max_abs();
        if !(blown <= DIVERGENCE_LIMIT) {
            return Err(Error::Diverged { step: n + 1 });
        }
        states.push(std::mem::replace(&mut state, next));
        torques.push(tau);
    }
    states.push(state);

    Trajectory::new(
        states,
        torques,
        spec.sample_time,
        TrajectoryMeta {
            system: spec.model.name().into(),
            seed,
            policy: policy.id.clone(),
        },
    )
}

/// `count` independent rollouts with seeds derived from `base_seed`.
pub fn rollouts(
    spec: &SystemSpec,
    policy: &ExplorationPolicy,
    n_states: usize,
    count: usize,
    base_seed: u64,
) -> Vec<Result<Trajectory>> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| rollout(spec, policy, n_states, crate::rng::derive_seed(base_seed, i as u64)))
        .collect()
}

/// Isotropic Gaussian random walk `z⁰_{n+1} = z⁰_n + N(0, αI)` in `2k`
/// dimensions, packaged as a trajectory with zero-width torques. This is the
/// idealised exploration model under which the smoothness bound is exact
/// in expectation.
pub fn isotropic_walk(config_dim: usize, n_states: usize, alpha: f64, seed: u64) -> Result<Trajectory> {
    if n_states < 2 || config_dim == 0 {
        return Err(Error::invalid("random walk needs k ≥ 1 and at least two states"));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("random-walk variance must be positive"));
    }
    let mut rng = SeededRng::new(seed);
    let sd = alpha.sqrt();
    let mut z = DVector::zeros(2 * config_dim);
    let mut states = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        states.push(State::from_vector(&z)?);
        z += DVector::from_vec(rng.normal_vec(2 * config_dim)) * sd;
    }
    Trajectory::new(
        states,
        vec![DVector::zeros(0); n_states - 1],
        1.0,
        TrajectoryMeta {
            system: "isotropic-walk".into(),
            seed,
            policy: format!("walk(alpha={alpha})"),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn force_free_motion() {
        let spec = SystemSpec::double_integrator(1, 0.05);
        let next = euler_step(&State::new(v(&[0.0]), v(&[1.0])), &v(&[0.0]), &spec).unwrap();
        assert_eq!(next.q[0], 0.05);
        assert_eq!(next.qdot[0], 1.0);
    }

    #[test]
    fn one_step_impulse() {
        let spec = SystemSpec::double_integrator(1, 0.05);
        let next = euler_step(&State::new(v(&[0.0]), v(&[0.0])), &v(&[2.0]), &spec).unwrap();
        assert_eq!(next.q[0], 0.0);
        assert!((next.qdot[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn force_free_velocity_is_conserved() {
        let spec = SystemSpec::double_integrator(3, 0.01);
        let mut s = State::new(v(&[0.1, -2.0, 3.0]), v(&[1.5, -0.25, 4.0]));
        for _ in 0..1000 {
            s = euler_step(&s, &v(&[0.0, 0.0, 0.0]), &spec).unwrap();
        }
        assert_eq!(s.qdot, v(&[1.5, -0.25, 4.0]));
    }

    #[test]
    fn compensation_drops_gravity() {
        let spec = SystemSpec::pendulum(1.0, 1.0, 0.01).with_compensation(true);
        let s = State::new(v(&[1.0]), v(&[0.0]));
        let next = euler_step(&s, &v(&[0.0]), &spec).unwrap();
        assert_eq!(next.qdot[0], 0.0);
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let spec = SystemSpec::double_integrator(2, 0.05);
        let s = State::new(v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        assert!(euler_step(&s, &v(&[0.0]), &spec).is_err());
        let bad = State::new(v(&[0.0]), v(&[0.0]));
        assert!(euler_step(&bad, &v(&[0.0, 0.0]), &spec).is_err());
    }

    #[test]
    fn tilde_b_scales_inverse_inertia() {
        let spec = SystemSpec::double_integrator(2, 0.05);
        let b = tilde_b(&spec, &v(&[0.3, -1.0])).unwrap();
        assert!((b - DMatrix::identity(2, 2) * 0.05).amax() < 1e-15);

        let heavy = SystemSpec::new(super::super::SystemModel::DoubleIntegrator { dim: 2, mass: 2.0 }, 0.05);
        let b = tilde_b(&heavy, &v(&[0.0, 0.0])).unwrap();
        assert!((b - DMatrix::identity(2, 2) * 0.025).amax() < 1e-15);
    }

    #[test]
    fn tilde_b_pendulum_formula() {
        let (m, l, ts) = (0.7, 1.3, 0.02);
        let spec = SystemSpec::pendulum(m, l, ts);
        let b = tilde_b(&spec, &v(&[std::f64::consts::FRAC_PI_4])).unwrap();
        assert!((b[(0, 0)] - ts / (m * l * l)).abs() < 1e-15);
    }

    #[test]
    fn quiet_policy_from_rest_stays_put() {
        let spec = SystemSpec::double_integrator(2, 0.05)
            .with_initial_distribution(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let policy = ExplorationPolicy::random(2, 0.0).unwrap();
        let traj = rollout(&spec, &policy, 10, 3).unwrap();
        assert_eq!(traj.len(), 10);
        assert_eq!(traj.torques.len(), 9);
        assert!(traj.states.iter().all(|s| *s == traj.states[0]));
    }

    #[test]
    fn rollout_is_deterministic() {
        let spec = SystemSpec::two_link_arm(0.01)
            .with_initial_distribution(vec![0.0, 0.5], vec![vec![0.1, 0.0], vec![0.0, 0.1]]);
        let policy = ExplorationPolicy::random(2, 1.0).unwrap();
        assert_eq!(
            rollout(&spec, &policy, 50, 8).unwrap(),
            rollout(&spec, &policy, 50, 8).unwrap()
        );
        assert_ne!(
            rollout(&spec, &policy, 50, 8).unwrap(),
            rollout(&spec, &policy, 50, 9).unwrap()
        );
    }

    #[test]
    fn rollout_reports_divergence() {
        // unstable positive feedback on a double integrator
        let spec = SystemSpec::double_integrator(1, 0.5).with_initial_distribution(vec![1.0], vec![vec![0.0]]);
        let policy = ExplorationPolicy::random(1, 0.0)
            .unwrap()
            .with_feedback(DMatrix::from_row_slice(1, 2, &[50.0, 50.0]));
        match rollout(&spec, &policy, 500, 0) {
            Err(Error::Diverged { step }) => assert!(step > 1 && step < 500),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rollout_rejects_short_schedule() {
        let spec = SystemSpec::double_integrator(1, 0.05);
        let policy = ExplorationPolicy::scheduled(vec![v(&[0.0]); 3], vec![DMatrix::identity(1, 1); 3]).unwrap();
        assert!(rollout(&spec, &policy, 4, 0).is_ok());
        assert!(rollout(&spec, &policy, 5, 0).is_err());
        assert!(rollout(&spec, &policy, 1, 0).is_err());
    }

    #[test]
    fn isotropic_walk_shape() {
        let t = isotropic_walk(2, 20, 0.01, 1).unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.state_matrix().ncols(), 4);
        assert_eq!(t.states[0].to_vector(), DVector::zeros(4));
    }
}
