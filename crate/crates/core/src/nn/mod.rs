//! Dense fully connected networks with reverse-mode gradients and Adam.
//!
//! This is the engine behind the MINE statistics network and the regression
//! probe: plain MLPs with ReLU hidden layers, an affine output layer, and
//! all arithmetic in `f64`.

mod adam;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use network::{Activation, Batch, ForwardPass, Gradients, Layer, Network};
