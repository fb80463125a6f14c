use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, m: &mut DMatrix<f64>) {
        if self == Activation::Relu {
            m.apply(|v| *v = v.max(0.0));
        }
    }
}

/// One dense layer, `y = act(W x + b)` with `W` stored `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// A fully connected feed-forward network. Hidden layers use ReLU, the final
/// layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// A batch of rows: `inputs` is `[B × d_in]`, `targets` (when present)
/// `[B × d_out]`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: DMatrix<f64>,
    pub targets: Option<DMatrix<f64>>,
}

impl Batch {
    pub fn new(inputs: DMatrix<f64>, targets: Option<DMatrix<f64>>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::invalid("batch must contain at least one row"));
        }
        if let Some(t) = &targets {
            if t.nrows() != inputs.nrows() {
                return Err(Error::invalid(format!(
                    "batch has {} input rows but {} target rows",
                    inputs.nrows(),
                    t.nrows()
                )));
            }
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Activations cached by [`Network::forward`]; `values[0]` is the input and
/// `values[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    values: Vec<DMatrix<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &DMatrix<f64> {
        self.values.last().expect("forward pass always holds the input")
    }

    pub fn batch_size(&self) -> usize {
        self.values[0].nrows()
    }
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.output_dim(), l.input_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| DVector::zeros(l.output_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net
                .layers
                .iter()
                .enumerate()
                .all(|(i, l)| self.weights[i].shape() == l.weights.shape() && self.biases[i].len() == l.bias.len())
    }
}

impl Network {
    /// Seeded initialisation: weights uniform in `±sqrt(6 / (fan_in + fan_out))`,
    /// biases zero.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a network needs at least two layer sizes"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer sizes must be positive"));
        }
        let mut rng = SeededRng::new(seed);
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                // row-major fill so the draw order does not depend on storage
                let mut weights = DMatrix::zeros(fan_out, fan_in);
                for r in 0..fan_out {
                    for c in 0..fan_in {
                        weights[(r, c)] = (2.0 * rng.uniform() - 1.0) * limit;
                    }
                }
                Layer {
                    weights,
                    bias: DVector::zeros(fan_out),
                    activation: if i == last {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assemble a network from explicit layers.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::invalid(format!("layer {i}: bias length mismatch")));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i}: non-finite parameter")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::invalid(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(Error::invalid("final layer activation must be identity"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flat parameter view in layer order: weights (column-major) then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::invalid("parameter vector length mismatch"));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = it.next().unwrap_or_default();
            }
            for b in l.bias.iter_mut() {
                *b = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &DMatrix<f64>) -> Result<ForwardPass> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input width {} does not match network input {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(inputs.clone());
        for layer in &self.layers {
            let x = values.last().expect("non-empty");
            let mut z = x * layer.weights.transpose();
            for (j, mut col) in z.column_iter_mut().enumerate() {
                col.add_scalar_mut(layer.bias[j]);
            }
            layer.activation.apply(&mut z);
            values.push(z);
        }
        Ok(ForwardPass { values })
    }

    /// Forward pass returning only the output.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut pass = self.forward(inputs)?;
        Ok(pass.values.pop().expect("non-empty"))
    }

    /// Parameter gradients of `L = (1/B) Σ_b ℓ_b` where row `b` of
    /// `output_gradient` holds `∂ℓ_b/∂y_b`.
    pub fn backward(&self, pass: &ForwardPass, output_gradient: &DMatrix<f64>) -> Result<Gradients> {
        self.backward_with_input(pass, output_gradient).map(|(g, _)| g)
    }

    /// As [`Network::backward`], also returning `∂ℓ_b/∂x_b` per row
    /// (not batch averaged).
    pub fn backward_with_input(
        &self,
        pass: &ForwardPass,
        output_gradient: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        if pass.values.len() != self.layers.len() + 1
            || pass
                .values
                .iter()
                .skip(1)
                .zip(&self.layers)
                .any(|(v, l)| v.ncols() != l.output_dim())
        {
            return Err(Error::invalid("forward cache does not belong to this network"));
        }
        let out = pass.output();
        if output_gradient.shape() != out.shape() {
            return Err(Error::invalid(format!(
                "output gradient is {:?}, expected {:?}",
                output_gradient.shape(),
                out.shape()
            )));
        }
        let inv_b = 1.0 / pass.batch_size() as f64;
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_gradient.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                delta.zip_apply(&pass.values[i + 1], |d, y| {
                    if y <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            let x = &pass.values[i];
            grads.weights[i].gemm_tr(inv_b, &delta, x, 0.0);
            for (j, col) in delta.column_iter().enumerate() {
                grads.biases[i][j] = col.sum() * inv_b;
            }
            delta = &delta * &layer.weights;
        }
        Ok((grads, delta))
    }

    pub(crate) fn apply_update(&mut self, update: impl Fn(usize, bool, usize, f64) -> f64) {
        for (li, l) in self.layers.iter_mut().enumerate() {
            for (k, w) in l.weights.iter_mut().enumerate() {
                *w = update(li, false, k, *w);
            }
            for (k, b) in l.bias.iter_mut().enumerate() {
                *b = update(li, true, k, *b);
            }
        }
    }

    pub(crate) fn gradients_match(&self, grads: &Gradients) -> bool {
        grads.matches(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_of_probe_shape() {
        let net = Network::new(&[2, 64, 64, 1], 0).unwrap();
        assert_eq!(net.parameter_count(), 2 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
        assert_eq!(net.parameter_count(), 4417);
    }

    #[test]
    fn single_linear_layer_has_zero_bias() {
        let net = Network::new(&[1, 1], 7).unwrap();
        assert_eq!(net.layers().len(), 1);
        assert_eq!(net.layers()[0].bias[0], 0.0);
        assert_eq!(net.layers()[0].activation, Activation::Identity);
    }

    #[test]
    fn init_is_deterministic() {
        let a = Network::new(&[3, 8, 2], 42).unwrap();
        let b = Network::new(&[3, 8, 2], 42).unwrap();
        let pa: Vec<u64> = a.parameters().iter().map(|v| v.to_bits()).collect();
        let pb: Vec<u64> = b.parameters().iter().map(|v| v.to_bits()).collect();
        assert_eq!(pa, pb);
        assert_ne!(a, Network::new(&[3, 8, 2], 43).unwrap());
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(Network::new(&[], 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(Network::new(&[3], 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(Network::new(&[3, 0, 1], 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn init_respects_bound() {
        let net = Network::new(&[10, 30], 1).unwrap();
        let limit = (6.0_f64 / 40.0).sqrt();
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= limit));
    }

    fn scalar_net(w: f64, act: Activation) -> Network {
        Network {
            layers: vec![Layer {
                weights: DMatrix::from_element(1, 1, w),
                bias: DVector::zeros(1),
                activation: act,
            }],
        }
    }

    #[test]
    fn identity_layer_passes_input() {
        let net = scalar_net(1.0, Activation::Identity);
        let y = net.predict(&DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!(y[(0, 0)], 3.0);
    }

    #[test]
    fn relu_clamps_negative() {
        let net = Network {
            layers: vec![
                Layer {
                    weights: DMatrix::from_element(1, 1, 1.0),
                    bias: DVector::zeros(1),
                    activation: Activation::Relu,
                },
                Layer {
                    weights: DMatrix::from_element(1, 1, 1.0),
                    bias: DVector::zeros(1),
                    activation: Activation::Identity,
                },
            ],
        };
        let pass = net.forward(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert_eq!(pass.values[1][(0, 0)], 0.0);
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let net = Network::new(&[2, 4, 1], 0).unwrap();
        assert!(matches!(
            net.forward(&DMatrix::zeros(5, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net = Network::new(&[3, 5, 2], 4).unwrap();
        let x = DMatrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let pass = net.forward(&x).unwrap();
        let g = net.backward(&pass, &DMatrix::zeros(4, 2)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_output_gradient_is_input() {
        let net = Network::new(&[3, 1], 9).unwrap();
        let x = DMatrix::from_row_slice(1, 3, &[0.5, -2.0, 1.25]);
        let pass = net.forward(&x).unwrap();
        let g = net.backward(&pass, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(g.weights[0], x);
        assert_eq!(g.biases[0][0], 1.0);
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let net = Network::new(&[3, 5, 2], 4).unwrap();
        let pass = net.forward(&DMatrix::zeros(4, 3)).unwrap();
        assert!(net.backward(&pass, &DMatrix::zeros(4, 3)).is_err());
        let other = Network::new(&[3, 6, 2], 4).unwrap();
        assert!(other.backward(&pass, &DMatrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn from_layers_validates() {
        let good = Layer {
            weights: DMatrix::zeros(2, 3),
            bias: DVector::zeros(2),
            activation: Activation::Identity,
        };
        assert!(Network::from_layers(vec![good.clone()]).is_ok());
        let relu_last = Layer {
            activation: Activation::Relu,
            ..good.clone()
        };
        assert!(Network::from_layers(vec![relu_last]).is_err());
        assert!(Network::from_layers(vec![good.clone(), good]).is_err());
    }
}
