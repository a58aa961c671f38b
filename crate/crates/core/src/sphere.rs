//! The ε-sphere around an input and the ball it encloses.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Sphere of `radius` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Closed ball of `radius` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "epsilon",
            "radius must be positive and finite",
        ))
    }
}

/// Uniform direction on the unit sphere S^{n-1} (normalized Gaussian).
pub fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let len = norm(&v);
        if len > 1e-300 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

impl SphereSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        crate::linalg::check_finite(&center)?;
        if center.is_empty() {
            return Err(Error::invalid("center", "empty"));
        }
        Ok(SphereSpec { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Surface area `2 π^{N/2} / Γ(N/2) · r^{N−1}`.
    pub fn area(&self) -> f64 {
        let n = self.dim() as f64;
        2.0 * libm::pow(core::f64::consts::PI, n / 2.0) / libm::tgamma(n / 2.0)
            * libm::pow(self.radius, n - 1.0)
    }

    /// Uniform point on the sphere surface.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.at_direction(&unit_direction(self.dim(), rng))
    }

    /// `center + radius · direction` for a unit `direction`.
    pub fn at_direction(&self, direction: &[f64]) -> Vec<f64> {
        self.center
            .iter()
            .zip(direction)
            .map(|(c, d)| c + self.radius * d)
            .collect()
    }

    pub fn ball(&self) -> BallSpec {
        BallSpec {
            center: self.center.clone(),
            radius: self.radius,
        }
    }
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = SphereSpec::new(center, radius)?;
        Ok(s.ball())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Volume `π^{N/2} / Γ(N/2 + 1) · r^N`.
    pub fn volume(&self) -> f64 {
        let n = self.dim() as f64;
        libm::pow(core::f64::consts::PI, n / 2.0) / libm::tgamma(n / 2.0 + 1.0)
            * libm::pow(self.radius, n)
    }

    /// Uniform point in the ball: uniform direction times `r · U^{1/N}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let dir = unit_direction(self.dim(), rng);
        let u: f64 = rng.random();
        let r = self.radius * libm::pow(u, 1.0 / self.dim() as f64);
        self.center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + r * d)
            .collect()
    }

    pub fn boundary(&self) -> SphereSpec {
        SphereSpec {
            center: self.center.clone(),
            radius: self.radius,
        }
    }
}
