//! Seeded synthetic datasets for training toy models.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::exec::rng_for;
use crate::linalg::dot;

const DATA_STREAM: u64 = 0xDA7A;

/// Two 2-D Gaussian blobs, alternating labels, whose projections on the
/// first axis are at least `margin` apart (linearly separable).
pub fn blobs(n: usize, margin: f64, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, DATA_STREAM, 0);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let label = k % 2;
        let side = if label == 1 { 1.0 } else { -1.0 };
        let u: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        features.push(alloc::vec![side * (margin / 2.0 + 0.5 * u.abs()), 0.7 * v]);
        labels.push(label);
    }
    Dataset { features, labels }
}

/// Standard-normal inputs labeled by `weights·x > 0`. Samples closer than
/// `margin` to the boundary (in `weights·x`) are redrawn.
pub fn planted_linear(n: usize, weights: &[f64], margin: f64, seed: u64) -> Dataset {
    let mut rng = rng_for(seed, DATA_STREAM, 1);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while features.len() < n {
        let x: Vec<f64> = weights
            .iter()
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let score = dot(weights, &x);
        if score.abs() < margin {
            continue;
        }
        labels.push(usize::from(score > 0.0));
        features.push(x);
    }
    Dataset { features, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_separable_with_margin() {
        let d = blobs(200, 1.0, 3);
        assert_eq!(d.len(), 200);
        for (x, &y) in d.features.iter().zip(&d.labels) {
            if y == 1 {
                assert!(x[0] >= 0.5);
            } else {
                assert!(x[0] <= -0.5);
            }
        }
    }

    #[test]
    fn planted_labels_follow_weights() {
        let w = [1.0, -2.0, 0.0];
        let d = planted_linear(100, &w, 0.1, 1);
        for (x, &y) in d.features.iter().zip(&d.labels) {
            assert_eq!(y == 1, dot(&w, x) > 0.0);
            assert!(dot(&w, x).abs() >= 0.1);
        }
        assert_eq!(d, planted_linear(100, &w, 0.1, 1));
    }
}
