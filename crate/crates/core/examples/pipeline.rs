//! The full batch pipeline (simulate, encode, evaluate, rank, report) driven
//! through the command-line entry point in a scratch directory.

use repmeter::cli::run;

const CONFIG: &str = r#"{
  "system": {"model": {"kind": "double-integrator", "dim": 1}, "sample_time": 0.1},
  "policy": {"mean": [0.0], "covariance": [[4.0]]},
  "rollouts": 4,
  "steps": 150,
  "zoo": [
    {"id": "identity", "kind": "identity"},
    {"id": "scaled", "kind": "scaled-affine", "params": {"scale": 3.0}},
    {"id": "noisy", "kind": "additive-noise", "params": {"sigma": 1.0}, "seed": 5}
  ],
  "evaluation": {"mine": {"steps": 800}, "probe": {"steps": 600}},
  "seeds": [0]
}"#;

pub fn main() {
    let dir = tempfile::tempdir().expect("scratch directory");
    let config = dir.path().join("run.json");
    std::fs::write(&config, CONFIG).expect("write config");
    let out = dir.path().join("out");
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    for args in [
        vec!["simulate", "--config", c, "--out", o],
        vec!["encode", "--config", c, "--out", o],
        vec!["evaluate", "--config", c, "--out", o],
        vec!["rank", "--out", o, "--by", "mi"],
        vec!["report", "--out", o],
    ] {
        println!("$ repmeter {}", args[0]);
        let code = run(std::iter::once("repmeter").chain(args.iter().copied()));
        assert_eq!(code, 0, "{} failed", args[0]);
    }
    let ranking = std::fs::read_to_string(out.join("ranking.csv")).expect("ranking written");
    print!("{ranking}");
}
