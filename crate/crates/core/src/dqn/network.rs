//! Fully connected Q-network: ReLU hidden layers, linear output.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    #[default]
    GlorotUniform,
    Zeros,
}

/// One affine layer. `weights` is `fan_in x fan_out`, so a batch of row
/// vectors maps as `x.dot(&weights) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Dense>,
}

/// Activations retained by [`MlpNetwork::forward_cached`] for backprop.
/// `activations[0]` is the input batch, `activations[i]` the output of layer `i - 1`
/// (after ReLU for hidden layers).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache always holds the input")
    }
}

impl MlpNetwork {
    /// `dims` lists layer widths from input to output, e.g. `[4, 128, 256, 3]`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], init: WeightInit, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                if init == WeightInit::GlorotUniform {
                    let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                    layer.weights.mapv_inplace(|_| rng.random_range(-limit..limit));
                }
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Config("adjacent layer shapes do not match".into()));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.fan_out()) {
            return Err(Error::Config("bias length does not match layer width".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].fan_in()];
        dims.extend(self.layers.iter().map(Dense::fan_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::fan_out).unwrap_or(0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Q-values for a single state.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Usage(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite network input {input:?}")));
        }
        let batch = ArrayView2::from_shape((1, input.len()), input).expect("shape checked above");
        let out = self.forward_batch(batch);
        let q = out.row(0).to_vec();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("network produced non-finite Q-values"));
        }
        Ok(q)
    }

    /// Outputs for a batch of row-vector inputs.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut x = affine(inputs, &self.layers[0]);
        if last > 0 {
            relu_inplace(&mut x);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            x = affine(x.view(), layer);
            if i < last {
                relu_inplace(&mut x);
            }
        }
        x
    }

    pub fn forward_cached(&self, inputs: ArrayView2<'_, f64>) -> ForwardCache {
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(activations[i].view(), layer);
            if i < last {
                relu_inplace(&mut z);
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Parameter gradients given `d loss / d output` for the cached batch.
    ///
    /// ReLU's derivative is taken as 0 at exactly 0.
    pub fn backward(&self, cache: &ForwardCache, grad_output: Array2<f64>) -> Vec<Dense> {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output;
        for i in (0..self.layers.len()).rev() {
            let input = &cache.activations[i];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Dense { weights, bias });
            if i > 0 {
                let mut upstream = delta.dot(&self.layers[i].weights.t());
                Zip::from(&mut upstream).and(input).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = upstream;
            }
        }
        grads.reverse();
        grads
    }

    /// Flat parameter vector: per layer, row-major weights then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) for a network of this shape.
    pub fn load_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Usage(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

fn affine(inputs: ArrayView2<'_, f64>, layer: &Dense) -> Array2<f64> {
    let mut z = inputs.dot(&layer.weights);
    z += &layer.bias;
    z
}

fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}
