//! Brute-force Monte-Carlo checks of the divergence theorem
//! `∫_V ∇·F dV = ∮_S F·n̂ dS` for the gradient field `F = ∇f`.
//!
//! Samples are drawn in fixed-size batches, each batch from its own derived
//! generator, and reduced with pairwise summation in batch order.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{rng_for, stream, Executor, Sequential};
use crate::gradfield::Model;
use crate::linalg::{check_dim, dot, mean_variance};
use crate::sphere::{unit_direction, BallSpec, SphereSpec};

pub const DEFAULT_FD_STEP: f64 = 1e-4;
const BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Per-coordinate integral estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEstimate {
    pub value: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub samples: usize,
}

/// Which surface points contribute, by sign of the exact flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxSubset {
    All,
    Negative,
    Positive,
}

impl FluxSubset {
    fn keeps(self, flux: f64) -> bool {
        match self {
            FluxSubset::All => true,
            FluxSubset::Negative => flux < 0.0,
            FluxSubset::Positive => flux > 0.0,
        }
    }
}

fn require_smooth(model: &Model) -> Result<()> {
    if model.is_smooth() {
        Ok(())
    } else {
        Err(Error::NotSmooth)
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("h", "step must be positive"))
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid("samples", "must be at least 1"));
    }
    Ok(())
}

/// `∂Fᵢ/∂xᵢ` for every i, by central differences of the exact gradient.
pub fn partial_divergence_fd(model: &Model, x: &[f64], h: f64) -> Result<Vec<f64>> {
    require_smooth(model)?;
    check_step(h)?;
    model.evaluate(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = model.gradient(&probe)?[i];
        probe[i] = orig - h;
        let down = model.gradient(&probe)?[i];
        probe[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `∇·F(x)`, the trace of the Hessian of `f`.
pub fn divergence_fd(model: &Model, x: &[f64], h: f64) -> Result<f64> {
    Ok(partial_divergence_fd(model, x, h)?.iter().sum())
}

/// Draws `samples` values in batches, each batch from its own generator.
fn draw<T, E, F>(exec: &E, samples: usize, seed: u64, stream: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    E: Executor,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    let batches = samples.div_ceil(BATCH);
    let out = exec.map(batches, |b| {
        let mut rng = rng_for(seed, stream, b as u64);
        let count = BATCH.min(samples - b * BATCH);
        (0..count).map(|_| f(&mut rng)).collect::<Result<Vec<T>>>()
    });
    let mut flat = Vec::with_capacity(samples);
    for batch in out {
        flat.extend(batch?);
    }
    Ok(flat)
}

fn scalar_estimate(values: &[f64], scale: f64) -> IntegralEstimate {
    let (mean, var) = mean_variance(values);
    IntegralEstimate {
        value: scale * mean,
        standard_error: scale * libm::sqrt(var / values.len() as f64),
        samples: values.len(),
    }
}

fn vector_estimate(rows: &[Vec<f64>], dim: usize, scale: f64) -> VectorEstimate {
    let mut value = Vec::with_capacity(dim);
    let mut standard_error = Vec::with_capacity(dim);
    let mut column = vec![0.0; rows.len()];
    for i in 0..dim {
        for (c, r) in column.iter_mut().zip(rows) {
            *c = r[i];
        }
        let e = scalar_estimate(&column, scale);
        value.push(e.value);
        standard_error.push(e.standard_error);
    }
    VectorEstimate {
        value,
        standard_error,
        samples: rows.len(),
    }
}

/// Monte-Carlo estimate of `∫_V ∇·F dV` over `ball`.
pub fn volume_divergence_integral(
    model: &Model,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<IntegralEstimate> {
    volume_divergence_integral_with(model, ball, samples, seed, &Sequential)
}

pub fn volume_divergence_integral_with<E: Executor>(
    model: &Model,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
    exec: &E,
) -> Result<IntegralEstimate> {
    require_smooth(model)?;
    check_samples(samples)?;
    check_dim(model.dim(), &ball.center)?;
    let values = draw(exec, samples, seed, stream::VOLUME, |rng| {
        divergence_fd(model, &ball.sample(rng), DEFAULT_FD_STEP)
    })?;
    Ok(scalar_estimate(&values, ball.volume()))
}

/// Monte-Carlo estimate of `∫_V ∂Fᵢ/∂xᵢ dV` for every i.
pub fn volume_partial_divergence_integral(
    model: &Model,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<VectorEstimate> {
    require_smooth(model)?;
    check_samples(samples)?;
    check_dim(model.dim(), &ball.center)?;
    let rows = draw(&Sequential, samples, seed, stream::VOLUME, |rng| {
        partial_divergence_fd(model, &ball.sample(rng), DEFAULT_FD_STEP)
    })?;
    Ok(vector_estimate(&rows, model.dim(), ball.volume()))
}

/// Exact gradient and unit normal at one uniform surface point.
fn surface_point<R: Rng + ?Sized>(
    model: &Model,
    sphere: &SphereSpec,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let normal = unit_direction(sphere.dim(), rng);
    let g = model.gradient(&sphere.at_direction(&normal))?;
    Ok((g, normal))
}

/// Monte-Carlo estimate of `∮_S (F·n̂) dS`, counting only points in `subset`.
pub fn surface_flux_integral(
    model: &Model,
    sphere: &SphereSpec,
    samples: usize,
    seed: u64,
    subset: FluxSubset,
) -> Result<IntegralEstimate> {
    surface_flux_integral_with(model, sphere, samples, seed, subset, &Sequential)
}

pub fn surface_flux_integral_with<E: Executor>(
    model: &Model,
    sphere: &SphereSpec,
    samples: usize,
    seed: u64,
    subset: FluxSubset,
    exec: &E,
) -> Result<IntegralEstimate> {
    check_samples(samples)?;
    check_dim(model.dim(), &sphere.center)?;
    let values = draw(exec, samples, seed, stream::SURFACE, |rng| {
        let (g, n) = surface_point(model, sphere, rng)?;
        let flux = dot(&g, &n);
        Ok(if subset.keeps(flux) { flux } else { 0.0 })
    })?;
    Ok(scalar_estimate(&values, sphere.area()))
}

/// Monte-Carlo estimate of `∮_S F ⊙ n̂ dS` (element-wise product), counting
/// only points in `subset`. Uses the same samples as
/// [`surface_flux_integral`] for equal `seed`.
pub fn surface_flux_integral_elementwise(
    model: &Model,
    sphere: &SphereSpec,
    samples: usize,
    seed: u64,
    subset: FluxSubset,
) -> Result<VectorEstimate> {
    check_samples(samples)?;
    check_dim(model.dim(), &sphere.center)?;
    let dim = model.dim();
    let rows = draw(&Sequential, samples, seed, stream::SURFACE, |rng| {
        let (g, n) = surface_point(model, sphere, rng)?;
        Ok(if subset.keeps(dot(&g, &n)) {
            g.iter().zip(&n).map(|(a, b)| a * b).collect()
        } else {
            vec![0.0; dim]
        })
    })?;
    Ok(vector_estimate(&rows, dim, sphere.area()))
}

/// Both sides of the divergence theorem on one ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// Volume integral of the divergence.
    pub lhs: f64,
    /// Surface integral of the flux.
    pub rhs: f64,
    pub diff: f64,
    /// Combined standard error of the two estimates.
    pub stderr: f64,
    pub pass: bool,
}

/// Relative agreement accepted when the difference exceeds 3σ.
pub const REPORT_RELATIVE_TOLERANCE: f64 = 0.02;

pub fn divergence_theorem_report(
    model: &Model,
    sphere: &SphereSpec,
    surface_samples: usize,
    volume_samples: usize,
    seed: u64,
) -> Result<DivergenceReport> {
    divergence_theorem_report_with(
        model,
        sphere,
        surface_samples,
        volume_samples,
        seed,
        &Sequential,
    )
}

pub fn divergence_theorem_report_with<E: Executor>(
    model: &Model,
    sphere: &SphereSpec,
    surface_samples: usize,
    volume_samples: usize,
    seed: u64,
    exec: &E,
) -> Result<DivergenceReport> {
    let lhs = volume_divergence_integral_with(model, &sphere.ball(), volume_samples, seed, exec)?;
    let rhs =
        surface_flux_integral_with(model, sphere, surface_samples, seed, FluxSubset::All, exec)?;
    let diff = lhs.value - rhs.value;
    let stderr = libm::hypot(lhs.standard_error, rhs.standard_error);
    let scale = lhs.value.abs().max(rhs.value.abs());
    let pass = diff.abs() <= 3.0 * stderr || diff.abs() <= REPORT_RELATIVE_TOLERANCE * scale;
    Ok(DivergenceReport {
        lhs: lhs.value,
        rhs: rhs.value,
        diff,
        stderr,
        pass,
    })
}
