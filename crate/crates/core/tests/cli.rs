use std::fs;
use std::path::{Path, PathBuf};

use repmeter::cli::{execute, run, Cli};
use repmeter::encoders::read_latent;
use repmeter::lagsim::read_trajectory;
use repmeter::Error;
use serde_json::{json, Value};

use clap::Parser;

fn config(seeds: &[u64]) -> Value {
    json!({
        "system": {"model": {"kind": "double-integrator", "dim": 1}, "sample_time": 0.1,
                   "q0_mean": [0.0], "q0_covariance": [[1.0]]},
        "policy": {"mean": [0.0], "covariance": [[4.0]], "feedback_gain": [[-1.0, -1.0]]},
        "rollouts": 10,
        "steps": 60,
        "zoo": [
            {"id": "identity", "kind": "identity"},
            {"id": "scaled", "kind": "scaled-affine", "params": {"scale": 5.0}},
            {"id": "positions", "kind": "collapsing-projection"},
            {"id": "fold", "kind": "folding", "params": {"coordinates": [0], "threshold": 0.0}},
            {"id": "noisy", "kind": "additive-noise", "params": {"sigma": 0.5}, "seed": 3}
        ],
        "evaluation": {"mine": {"steps": 300}, "probe": {"steps": 300}, "histogram_bins": 7},
        "seeds": seeds,
    })
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(cfg: &Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.json"), serde_json::to_string_pretty(cfg).unwrap()).unwrap();
        Self { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, args: &[&str]) -> i32 {
        run(self.argv(args))
    }

    fn execute(&self, args: &[&str]) -> repmeter::Result<()> {
        execute(&Cli::try_parse_from(self.argv(args)).unwrap())
    }

    fn argv(&self, args: &[&str]) -> Vec<String> {
        let mut v = vec!["repmeter".to_string(), args[0].to_string()];
        if matches!(args[0], "simulate" | "encode" | "evaluate") {
            v.push("--config".into());
            v.push(self.dir.path().join("run.json").display().to_string());
        }
        v.push("--out".into());
        v.push(self.out().display().to_string());
        v.extend(args[1..].iter().map(|s| s.to_string()));
        v
    }
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    files(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn simulate_writes_one_file_per_rollout_and_is_idempotent() {
    let ws = Workspace::new(&config(&[0]));
    assert_eq!(ws.run(&["simulate"]), 0);
    let first = snapshot(&ws.out());
    assert_eq!(first.len(), 10);
    assert!(first[0].0.ends_with("trajectories/seed-0/rollout-0000.csv"));
    assert_eq!(ws.run(&["simulate"]), 0);
    assert_eq!(snapshot(&ws.out()), first);

    let other = Workspace::new(&config(&[0]));
    assert_eq!(other.run(&["simulate"]), 0);
    assert_eq!(snapshot(&other.out()), first);
}

#[test]
fn encode_writes_one_file_per_encoder_and_trajectory() {
    let ws = Workspace::new(&config(&[0]));
    assert_eq!(ws.run(&["simulate"]), 0);
    assert_eq!(ws.run(&["encode"]), 0);
    let latents = files(&ws.out().join("latents"));
    assert_eq!(latents.len(), 50);

    let traj = read_trajectory(&ws.out().join("trajectories/seed-0/rollout-0003.csv")).unwrap();
    let lat = read_latent(&ws.out().join("latents/seed-0/identity/rollout-0003.csv")).unwrap();
    assert_eq!(lat.len(), traj.len());
    for n in 0..traj.len() {
        assert_eq!(lat.latents[n], traj.z(n));
    }
}

#[test]
fn corrupted_trajectory_is_reported_with_its_line() {
    let ws = Workspace::new(&config(&[0]));
    assert_eq!(ws.run(&["simulate"]), 0);
    let path = ws.out().join("trajectories/seed-0/rollout-0002.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[6] = "0.1,not-a-number,0,0";
    fs::write(&path, lines.join("\n")).unwrap();

    match ws.execute(&["encode"]) {
        Err(Error::Corrupt { path: p, line, .. }) => {
            assert_eq!(p, path);
            assert_eq!(line, 7);
        }
        other => panic!("expected a corrupt-file error, got {other:?}"),
    }
    assert_eq!(ws.run(&["encode"]), 3);
}

#[test]
fn config_problems_exit_with_two() {
    let mut cfg = config(&[0]);
    cfg["unexpected"] = json!(1);
    assert_eq!(Workspace::new(&cfg).run(&["simulate"]), 2);

    let mut cfg = config(&[0]);
    cfg["zoo"][0]["kind"] = json!("no-such-encoder");
    let ws = Workspace::new(&cfg);
    assert_eq!(ws.run(&["simulate"]), 2);

    assert_eq!(run(["repmeter", "simulate", "--config", "/definitely/missing.json"]), 2);
    assert_eq!(run(["repmeter", "frobnicate"]), 2);
    let ws = Workspace::new(&config(&[0]));
    assert_eq!(ws.run(&["evaluate", "--metrics", "mine,telepathy"]), 2);
}

#[test]
fn single_seed_metric_subset_report() {
    let ws = Workspace::new(&config(&[0]));
    assert_eq!(ws.run(&["simulate"]), 0);
    assert_eq!(ws.run(&["encode"]), 0);
    assert_eq!(ws.run(&["evaluate", "--metrics", "mine,ratio-histogram"]), 0);

    let report: Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("reports/identity.json")).unwrap()).unwrap();
    assert!(report["mi"]["mean"].is_number());
    assert!(report["mi"].get("spread").is_none());
    assert!(report["regression_error"].is_null());
    assert!(report["uniqueness_score"].is_null());
    let bins = report["ratio_histogram"]["counts"].as_array().unwrap().len();
    assert_eq!(bins, 7);
    let csv = fs::read_to_string(ws.out().join("reports/identity.histogram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 7);
}

#[test]
fn full_pipeline_with_two_seeds() {
    let ws = Workspace::new(&config(&[0, 1]));
    for cmd in ["simulate", "encode", "evaluate"] {
        assert_eq!(ws.run(&[cmd]), 0, "{cmd}");
    }
    let report: Value =
        serde_json::from_str(&fs::read_to_string(ws.out().join("reports/noisy.json")).unwrap()).unwrap();
    assert_eq!(report["mi"]["per_seed"].as_array().unwrap().len(), 2);
    assert!(report["mi"]["spread"].is_number());
    assert!(report["regression_error"]["spread"].is_number());
    assert_eq!(report["ground_truth"]["invertible"], json!(false));

    for key in ["mi", "regression-error", "uniqueness-score"] {
        assert_eq!(ws.run(&["rank", "--by", key]), 0, "{key}");
    }
    let ranking: Value = serde_json::from_str(&fs::read_to_string(ws.out().join("ranking.json")).unwrap()).unwrap();
    assert_eq!(ranking["by"], json!("uniqueness-score"));
    let rows = ranking["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    // the projection has no square Jacobian, so it has no uniqueness score
    assert_eq!(rows.last().unwrap()["encoder"], json!("positions"));
    assert!(rows.last().unwrap()["value"].is_null());

    assert_eq!(ws.run(&["report"]), 0);
    let plots = snapshot(&ws.out().join("plots"));
    assert_eq!(plots.len(), 2 + 5);
    assert_eq!(ws.run(&["report"]), 0);
    assert_eq!(snapshot(&ws.out().join("plots")), plots);

    // tampering with the schema version is refused
    let path = ws.out().join("reports/fold.json");
    let mut value: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    value["schema_version"] = json!(999);
    fs::write(&path, value.to_string()).unwrap();
    assert_eq!(ws.run(&["rank"]), 4);
    fs::write(&path, "{ not json").unwrap();
    assert_eq!(ws.run(&["rank"]), 3);
}

#[test]
fn numeric_failure_of_every_metric_exits_with_five() {
    let mut cfg = config(&[0]);
    cfg["evaluation"]["mine"]["learning_rate"] = json!(1e300);
    let ws = Workspace::new(&cfg);
    assert_eq!(ws.run(&["simulate"]), 0);
    assert_eq!(ws.run(&["encode"]), 0);
    assert_eq!(ws.run(&["evaluate", "--metrics", "mine"]), 5);
}

#[test]
fn rank_needs_reports() {
    let ws = Workspace::new(&config(&[0]));
    fs::create_dir_all(ws.out().join("reports")).unwrap();
    assert_eq!(ws.run(&["rank"]), 2);
    assert_eq!(ws.run(&["report"]), 2);
}
