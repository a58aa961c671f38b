#![allow(dead_code)]

use fluxgrad_core::gradfield::datasets::planted_linear;
use fluxgrad_core::gradfield::{fit_toy_model, Layer, MlpArch, MlpParams, TrainConfig};
use fluxgrad_core::{Activation, Head, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random MLP with layer widths `dims` (input first); the last layer is linear.
pub fn random_mlp(dims: &[usize], activation: Activation, head: Head, seed: u64) -> Model {
    let mut r = rng(seed);
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| Layer {
            weights: (0..w[1]).map(|_| random_vec(&mut r, w[0], 1.0)).collect(),
            bias: random_vec(&mut r, w[1], 0.5),
            activation: if i + 2 == dims.len() {
                Activation::Identity
            } else {
                activation
            },
        })
        .collect();
    Model::mlp(dims[0], MlpParams { layers }, head).unwrap()
}

pub const PLANTED_WEIGHTS: [f64; 6] = [2.0, -1.5, 1.0, 0.0, 0.5, 0.0];

/// Softplus MLP trained on planted-linear data, and held-out inputs it
/// classifies as class 1 with probability above 0.9.
pub fn toy_classifier(test_inputs: usize) -> (Model, f64, Vec<Vec<f64>>) {
    let train = planted_linear(400, &PLANTED_WEIGHTS, 0.2, 11);
    let arch = MlpArch {
        hidden: vec![16],
        activation: Activation::Softplus,
    };
    let cfg = TrainConfig {
        epochs: 500,
        learning_rate: 0.5,
        seed: 5,
    };
    let trained = fit_toy_model(&train, &arch, &cfg).unwrap();
    let pool = planted_linear(20 * test_inputs, &PLANTED_WEIGHTS, 0.2, 12);
    let inputs: Vec<Vec<f64>> = pool
        .features
        .into_iter()
        .filter(|x| trained.model.evaluate(x).unwrap() > 0.9)
        .take(test_inputs)
        .collect();
    assert_eq!(inputs.len(), test_inputs);
    (trained.model, trained.accuracy, inputs)
}
