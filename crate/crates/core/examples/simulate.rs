//! Roll out a two-link arm under random torques, save one trajectory to CSV,
//! and compare the empirical velocity-difference covariance with B̃ΣB̃ᵀ.

use nalgebra::DMatrix;
use repmeter::lagsim::{
    first_difference_stats, read_trajectory, rollouts, second_difference_stats, tilde_b, write_trajectory,
    ExplorationPolicy, SystemSpec,
};

pub fn main() -> repmeter::Result<()> {
    let spec = SystemSpec::double_integrator(2, 0.05);
    let policy = ExplorationPolicy::random(2, 1.0)?;
    let trajs = rollouts(&spec, &policy, 40, 1000, 11)
        .into_iter()
        .collect::<repmeter::Result<Vec<_>>>()?;
    println!("{} rollouts of {} states", trajs.len(), trajs[0].len());

    let dir = tempfile::tempdir().expect("scratch directory");
    let path = dir.path().join("rollout.csv");
    write_trajectory(&path, &trajs[0])?;
    let back = read_trajectory(&path)?;
    println!(
        "round trip through {}: identical = {}",
        path.display(),
        back == trajs[0]
    );

    let n = 20;
    let stats = first_difference_stats(&trajs, n)?;
    let b = tilde_b(&spec, &trajs[0].states[n].q)?;
    let expected = &b * DMatrix::identity(2, 2) * b.transpose();
    let err = (stats.velocity_covariance() - &expected).norm() / expected.norm();
    println!("velocity δ¹ covariance at n={n}: relative error {:.2}%", 100.0 * err);

    let arm = SystemSpec::two_link_arm(0.01);
    let push = ExplorationPolicy::gaussian(nalgebra::dvector![0.5, -0.2], DMatrix::identity(2, 2))?;
    let arm_trajs = rollouts(&arm, &push, 60, 500, 12)
        .into_iter()
        .collect::<repmeter::Result<Vec<_>>>()?;
    for n in [5, 20, 50] {
        let first = first_difference_stats(&arm_trajs, n)?.position_mean().norm();
        let second = second_difference_stats(&arm_trajs, n)?.position_mean().norm();
        println!("arm n={n}: position bias δ¹ {first:.2e}, δ² {second:.2e}");
    }
    Ok(())
}
