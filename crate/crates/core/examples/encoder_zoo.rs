//! Build an encoder zoo from JSON, encode one state with each member, and
//! print the ground-truth labels and log-determinants.

use nalgebra::dvector;
use repmeter::encoders::{build_zoo, EncoderConfig};

const ZOO: &str = r#"[
  {"id": "identity", "kind": "identity"},
  {"id": "scaled-10", "kind": "scaled-affine", "params": {"scale": 10.0}},
  {"id": "tanh-mix", "kind": "smooth-bijection",
   "params": {"matrix": [[0.3,0.1,-0.05,0],[0.05,0.25,0,0.1],[0,-0.1,0.3,0.05],[0.1,0,0.05,0.25]]}},
  {"id": "positions-only", "kind": "collapsing-projection"},
  {"id": "fold", "kind": "folding", "params": {"coordinates": [0], "threshold": 0.0}},
  {"id": "noisy", "kind": "additive-noise", "params": {"sigma": 0.5}, "seed": 4},
  {"id": "mlp", "kind": "random-mlp", "params": {"hidden": [16]}, "seed": 2}
]"#;

pub fn main() -> repmeter::Result<()> {
    let configs: Vec<EncoderConfig> = serde_json::from_str(ZOO).expect("valid zoo JSON");
    let zoo = build_zoo(&configs, 4)?;
    let z0 = dvector![0.4, -0.7, 1.2, 0.1];
    for enc in &zoo {
        let z = enc.encode(&z0, 0)?;
        let truth = enc.ground_truth();
        let logdet = match enc.log_abs_det_jacobian(&z0) {
            Ok(ld) => format!("{:.4}", ld.log_abs),
            Err(e) => format!("n/a ({e})"),
        };
        println!(
            "{:<15} {:<20} out {} invertible {:?} ({:?})  ln|det J| {logdet}",
            enc.id,
            enc.kind_name(),
            z.len(),
            truth.invertible,
            truth.provenance,
        );
        if let Ok(back) = enc.inverse(&z) {
            println!("{:<15} inverse error {:.2e}", "", (back - &z0).norm());
        }
    }
    Ok(())
}
