//! Full-batch gradient-descent trainer for small MLP classifiers.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::mlp::{sigmoid, Activation, Layer, MlpParams};
use super::{Head, Model};
use crate::error::{Error, Result};
use crate::exec::{rng_for, stream};

/// Labeled vectors. Labels are class indices `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::invalid("labels", "one label per sample required"));
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::invalid("features", "samples have no features"));
        }
        for row in &features {
            crate::linalg::check_dim(dim, row)?;
            crate::linalg::check_finite(row)?;
        }
        Ok(Dataset { features, labels })
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Number of classes, at least 2.
    pub fn classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0).max(1) + 1
    }
}

/// Hidden-layer widths and their activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpArch {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for MlpArch {
    fn default() -> Self {
        MlpArch {
            hidden: vec![16],
            activation: Activation::Softplus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// Trains an MLP on `data`. Binary labels give one logit with a sigmoid head;
/// K > 2 classes give K logits with a softmax head targeting class 0.
/// Deterministic given `cfg.seed`.
pub fn fit_toy_model(data: &Dataset, arch: &MlpArch, cfg: &TrainConfig) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if arch.hidden.contains(&0) {
        return Err(Error::invalid("hidden", "layer widths must be positive"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::invalid("learning_rate", "must be positive"));
    }
    let classes = data.classes();
    let outputs = if classes == 2 { 1 } else { classes };
    let mut params = init_params(data.dim(), &arch.hidden, arch.activation, outputs, cfg.seed);

    let n = data.len() as f64;
    for _ in 0..cfg.epochs {
        let mut grads = params.zero_grads();
        for (x, &y) in data.features.iter().zip(&data.labels) {
            let trace = params.forward(x);
            let mut d = loss_derivative(trace.logits(), y);
            d.iter_mut().for_each(|v| *v /= n);
            params.backward(&trace, &d, Some(&mut grads));
        }
        for (layer, g) in params.layers.iter_mut().zip(&grads) {
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= cfg.learning_rate * gb;
            }
            for (row, grow) in layer.weights.iter_mut().zip(&g.weights) {
                for (w, gw) in row.iter_mut().zip(grow) {
                    *w -= cfg.learning_rate * gw;
                }
            }
        }
    }

    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        let trace = params.forward(x);
        let z = trace.logits();
        loss += sample_loss(z, y);
        if predict(z) == y {
            correct += 1;
        }
    }
    let head = if outputs == 1 {
        Head::Sigmoid
    } else {
        Head::Softmax { target: 0 }
    };
    Ok(TrainedModel {
        model: Model::mlp(data.dim(), params, head)?,
        final_loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

fn init_params(
    dim: usize,
    hidden: &[usize],
    activation: Activation,
    outputs: usize,
    seed: u64,
) -> MlpParams {
    let mut rng = rng_for(seed, stream::TRAIN_INIT, 0);
    let mut widths = vec![dim];
    widths.extend_from_slice(hidden);
    widths.push(outputs);
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (fan_in, fan_out) = (w[0], w[1]);
            // Glorot uniform
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let weights = (0..fan_out)
                .map(|_| {
                    (0..fan_in)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect()
                })
                .collect();
            let activation = if i == hidden.len() {
                Activation::Identity
            } else {
                activation
            };
            Layer {
                weights,
                bias: vec![0.0; fan_out],
                activation,
            }
        })
        .collect();
    MlpParams { layers }
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(z.iter().map(|v| libm::exp(v - max)).sum::<f64>());
    z.iter().map(|v| v - lse).collect()
}

fn sample_loss(z: &[f64], y: usize) -> f64 {
    if z.len() == 1 {
        let t = if y == 1 { 1.0 } else { 0.0 };
        Activation::Softplus.apply(z[0]) - t * z[0]
    } else {
        -log_softmax(z)[y]
    }
}

fn loss_derivative(z: &[f64], y: usize) -> Vec<f64> {
    if z.len() == 1 {
        let t = if y == 1 { 1.0 } else { 0.0 };
        vec![sigmoid(z[0]) - t]
    } else {
        log_softmax(z)
            .into_iter()
            .enumerate()
            .map(|(k, lp)| libm::exp(lp) - if k == y { 1.0 } else { 0.0 })
            .collect()
    }
}

fn predict(z: &[f64]) -> usize {
    if z.len() == 1 {
        return usize::from(z[0] > 0.0);
    }
    z.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &v)| {
            if v > best.1 {
                (k, v)
            } else {
                best
            }
        })
        .0
}
