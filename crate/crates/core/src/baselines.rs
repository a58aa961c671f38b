//! Reference gradient attribution methods: saliency, SmoothGrad and
//! integrated gradients, plus a seeded random attribution for evaluation.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMap, Method};
use crate::error::{Error, Result};
use crate::exec::{rng_for, stream, Executor, Sequential};
use crate::gradfield::Model;
use crate::linalg::{check_dim, hadamard, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgConfig {
    /// Path start; `None` means the zero vector.
    pub baseline: Option<Vec<f64>>,
    pub steps: usize,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig {
            baseline: None,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothGradConfig {
    pub sigma: f64,
    pub samples: usize,
    pub seed: u64,
    /// Multiply the averaged gradient by the input.
    pub times_input: bool,
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        SmoothGradConfig {
            sigma: 0.15,
            samples: 50,
            seed: 0,
            times_input: false,
        }
    }
}

/// Running mean in index order. Exact for constant sequences.
fn running_mean(rows: impl IntoIterator<Item = Result<Vec<f64>>>) -> Result<Vec<f64>> {
    let mut mean: Vec<f64> = Vec::new();
    for (k, row) in rows.into_iter().enumerate() {
        let row = row?;
        if k == 0 {
            mean = row;
            continue;
        }
        let count = (k + 1) as f64;
        for (m, v) in mean.iter_mut().zip(&row) {
            *m += (v - *m) / count;
        }
    }
    Ok(mean)
}

/// The gradient at `x`.
pub fn saliency(model: &Model, x: &[f64]) -> Result<AttributionMap> {
    Ok(AttributionMap::new(Method::Saliency, model.gradient(x)?).with_samples(1))
}

pub fn smoothgrad(model: &Model, x: &[f64], cfg: &SmoothGradConfig) -> Result<AttributionMap> {
    smoothgrad_with(model, x, cfg, &Sequential)
}

/// Mean gradient over `x + η`, `η ~ N(0, σ²I)`.
pub fn smoothgrad_with<E: Executor>(
    model: &Model,
    x: &[f64],
    cfg: &SmoothGradConfig,
    exec: &E,
) -> Result<AttributionMap> {
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be non-negative"));
    }
    if cfg.samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    model.evaluate(x)?;
    let grads = exec.map(cfg.samples, |j| {
        let mut rng = rng_for(cfg.seed, stream::SMOOTHGRAD, j as u64);
        let noisy: Vec<f64> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + cfg.sigma * z
            })
            .collect();
        model.gradient(&noisy)
    });
    let mut values = running_mean(grads)?;
    if cfg.times_input {
        values = hadamard(&values, x);
    }
    Ok(AttributionMap::new(Method::Smoothgrad, values)
        .with_param("sigma", cfg.sigma)
        .with_param("samples", cfg.samples)
        .with_param("seed", cfg.seed)
        .with_param("times_input", cfg.times_input)
        .with_samples(cfg.samples))
}

pub fn integrated_gradients(model: &Model, x: &[f64], cfg: &IgConfig) -> Result<AttributionMap> {
    integrated_gradients_with(model, x, cfg, &Sequential)
}

/// Midpoint-rule path integral of the gradient from the baseline to `x`,
/// times `x − baseline`. The map records the attribution sum and the output
/// change it should match.
pub fn integrated_gradients_with<E: Executor>(
    model: &Model,
    x: &[f64],
    cfg: &IgConfig,
    exec: &E,
) -> Result<AttributionMap> {
    if cfg.steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let fx = model.evaluate(x)?;
    let baseline = match &cfg.baseline {
        Some(b) => {
            check_dim(model.dim(), b)?;
            b.clone()
        }
        None => alloc::vec![0.0; model.dim()],
    };
    let f_base = model.evaluate(&baseline)?;
    let delta = sub(x, &baseline);
    let steps = cfg.steps;
    let grads = exec.map(steps, |j| {
        let alpha = (j as f64 + 0.5) / steps as f64;
        let point: Vec<f64> = baseline
            .iter()
            .zip(&delta)
            .map(|(b, d)| b + alpha * d)
            .collect();
        model.gradient(&point)
    });
    let values = hadamard(&running_mean(grads)?, &delta);
    let total: f64 = values.iter().sum();
    Ok(AttributionMap::new(Method::Ig, values)
        .with_param("steps", steps)
        .with_param("attribution_sum", total)
        .with_param("output_delta", fx - f_base)
        .with_samples(steps))
}

/// Uniform `[0, 1)` scores; an uninformed ordering for evaluation.
pub fn random_attribution(dim: usize, seed: u64, index: u64) -> AttributionMap {
    let mut rng = rng_for(seed, stream::RANDOM_ATTR, index);
    let values = (0..dim).map(|_| rng.random::<f64>()).collect();
    AttributionMap::new(Method::Random, values).with_param("seed", seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn saliency_examples() {
        let lin = Model::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(saliency(&lin, &[9.0, -3.0]).unwrap().values, vec![1.0, 2.0]);
        let q = Model::quadratic(vec![1.0, 3.0], vec![2.0, -1.0]).unwrap();
        assert_eq!(saliency(&q, &[2.0, -1.0]).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn smoothgrad_without_noise_is_saliency() {
        let m = Model::gauss_bump(3).unwrap();
        let x = [0.3, -0.2, 0.9];
        let cfg = SmoothGradConfig {
            sigma: 0.0,
            samples: 17,
            ..SmoothGradConfig::default()
        };
        assert_eq!(
            smoothgrad(&m, &x, &cfg).unwrap().values,
            saliency(&m, &x).unwrap().values
        );
    }

    #[test]
    fn smoothgrad_on_linear_is_saliency() {
        let m = Model::linear(vec![0.1, 0.7, -0.3], 1.0).unwrap();
        let cfg = SmoothGradConfig {
            sigma: 2.5,
            samples: 33,
            ..SmoothGradConfig::default()
        };
        assert_eq!(
            smoothgrad(&m, &[1.0, 2.0, 3.0], &cfg).unwrap().values,
            vec![0.1, 0.7, -0.3]
        );
    }

    #[test]
    fn ig_on_linear_is_weights_times_input() {
        let m = Model::linear(vec![0.1, 0.7, -0.3], 1.0).unwrap();
        let x = [1.5, -2.0, 3.0];
        for steps in [1, 7, 100] {
            let map = integrated_gradients(
                &m,
                &x,
                &IgConfig {
                    baseline: None,
                    steps,
                },
            )
            .unwrap();
            assert_eq!(map.values, hadamard(&[0.1, 0.7, -0.3], &x));
        }
    }

    #[test]
    fn ig_at_baseline_is_zero() {
        let m = Model::gauss_bump(2).unwrap();
        let b = vec![0.4, 0.1];
        let map = integrated_gradients(
            &m,
            &b,
            &IgConfig {
                baseline: Some(b.clone()),
                steps: 10,
            },
        )
        .unwrap();
        assert_eq!(map.values, vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_configs() {
        let m = Model::linear(vec![1.0], 0.0).unwrap();
        let bad_ig = IgConfig {
            baseline: None,
            steps: 0,
        };
        assert!(integrated_gradients(&m, &[1.0], &bad_ig).is_err());
        let bad_base = IgConfig {
            baseline: Some(vec![0.0, 0.0]),
            steps: 3,
        };
        assert!(integrated_gradients(&m, &[1.0], &bad_base).is_err());
        let bad_sg = SmoothGradConfig {
            sigma: -1.0,
            ..SmoothGradConfig::default()
        };
        assert!(smoothgrad(&m, &[1.0], &bad_sg).is_err());
    }

    #[test]
    fn random_attribution_is_seeded() {
        assert_eq!(random_attribution(5, 3, 0), random_attribution(5, 3, 0));
        assert_ne!(
            random_attribution(5, 3, 0).values,
            random_attribution(5, 3, 1).values
        );
    }
}
