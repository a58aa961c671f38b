use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softplus,
    /// Used for the output (logit) layer.
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => libm::tanh(z),
            // log(1 + e^z) without overflow
            Activation::Softplus => z.max(0.0) + libm::log1p(libm::exp(-z.abs())),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Dense layer `a = act(W x + b)`; `weights` is row-major, one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Pre- and post-activation values of every layer, input first.
pub(crate) struct Trace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.post.last().expect("trace holds at least the input")
    }
}

/// Parameter gradients with the same shapes as the layers.
pub(crate) struct LayerGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl MlpParams {
    pub(crate) fn validate(&self, dim: usize) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid(
                "params.layers",
                "at least one layer required",
            ));
        }
        let mut width = dim;
        for layer in &self.layers {
            if layer.outputs() == 0 || layer.weights.len() != layer.outputs() {
                return Err(Error::invalid(
                    "params.layers",
                    "weight rows must match bias length",
                ));
            }
            if layer.weights.iter().any(|row| row.len() != width) {
                return Err(Error::invalid("params.layers", "layer shapes do not chain"));
            }
            let finite = layer.bias.iter().all(|v| v.is_finite())
                && layer.weights.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid("params.layers", "non-finite parameter"));
            }
            width = layer.outputs();
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn uses_relu(&self) -> bool {
        self.layers.iter().any(|l| l.activation == Activation::Relu)
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Trace {
        let mut pre = Vec::with_capacity(self.layers.len() + 1);
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        pre.push(x.to_vec());
        post.push(x.to_vec());
        for layer in &self.layers {
            let input = post.last().unwrap();
            let z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| crate::linalg::dot(row, input) + b)
                .collect();
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }

    /// Pre-activations of every layer at `x`, for locating relu kinks.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = self.forward(x);
        trace.pre.remove(0);
        trace.pre
    }

    /// Back-propagates `d_logits` through the network. Returns the input
    /// gradient and, when `params` is set, the per-layer parameter gradients.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        d_logits: &[f64],
        params: Option<&mut Vec<LayerGrads>>,
    ) -> Vec<f64> {
        let mut delta_post = d_logits.to_vec();
        let mut grads = params;
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[li + 1];
            let a = &trace.post[li + 1];
            let delta: Vec<f64> = delta_post
                .iter()
                .zip(z.iter().zip(a))
                .map(|(d, (&zi, &ai))| d * layer.activation.derivative(zi, ai))
                .collect();
            let input = &trace.post[li];
            if let Some(g) = grads.as_deref_mut() {
                let lg = &mut g[li];
                for (o, &d) in delta.iter().enumerate() {
                    lg.bias[o] += d;
                    for (w, &xi) in lg.weights[o].iter_mut().zip(input) {
                        *w += d * xi;
                    }
                }
            }
            let mut prev = vec![0.0; layer.inputs()];
            for (row, &d) in layer.weights.iter().zip(&delta) {
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            delta_post = prev;
        }
        delta_post
    }

    pub(crate) fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers
            .iter()
            .map(|l| LayerGrads {
                weights: vec![vec![0.0; l.inputs()]; l.outputs()],
                bias: vec![0.0; l.outputs()],
            })
            .collect()
    }
}
