#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fluxgrad_core::gradfield::datasets::planted_linear;
use fluxgrad_core::gradfield::{fit_toy_model, Dataset, Layer, MlpArch, MlpParams, TrainConfig};
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

pub fn planted_train() -> Dataset {
    planted_linear(400, &PLANTED_WEIGHTS, 0.2, 11)
}

pub fn toy_train_config() -> (MlpArch, TrainConfig) {
    let arch = MlpArch {
        hidden: vec![16],
        activation: Activation::Softplus,
    };
    (
        arch,
        TrainConfig {
            epochs: 500,
            learning_rate: 0.5,
            seed: 5,
        },
    )
}

/// Softplus MLP trained on planted-linear data, and held-out inputs it
/// classifies as class 1 with probability above 0.9.
pub fn toy_classifier(test_inputs: usize) -> (Model, f64, Vec<Vec<f64>>) {
    let (arch, cfg) = toy_train_config();
    let trained = fit_toy_model(&planted_train(), &arch, &cfg).unwrap();
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

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn write_rows(path: &Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(path, text).unwrap();
}

pub fn write_dataset(path: &Path, data: &Dataset) {
    let rows: Vec<Vec<f64>> = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, &l)| x.iter().copied().chain([l as f64]).collect())
        .collect();
    write_rows(path, &rows);
}

/// Runs the `fluxgrad` binary with a worker cap.
pub fn fluxgrad(threads: usize, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxgrad"))
        .args(args)
        .env("FLUXGRAD_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
