//! Negative flux aggregation.
//!
//! For an input `x` and radius ε, points `x̃` on the sphere `|x̃ − x| = ε`
//! where the gradient field points inward (`F(x̃)·n̂ < 0`) are located by a
//! short recurrence from a random start, and their contributions
//! `F(x̃) ⊙ (x − x̃)` are summed into the attribution map.
//!
//! Two step rules are provided. [`StepRule::Normalized`] maps a point to
//! `x − ε F/|F|`, which stays on the sphere and converges towards a local
//! minimum of `f` on it. [`StepRule::Sign`] maps to `x − ε sign(F)`, a corner
//! of the cube of half-width ε (distance `ε√N` from `x`); it spreads the
//! accepted points over the negative-flux region instead of concentrating
//! them at the minimum.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMap, Method};
use crate::error::{Error, Result};
use crate::exec::{rng_for, stream, Executor, Sequential};
use crate::gradfield::Model;
use crate::linalg::{check_dim, distance, dot, hadamard, norm, sign, sub};
use crate::sphere::SphereSpec;

/// Search attempts allowed per requested sample; the budget for a run of
/// `n` samples is `RETRY_FACTOR · n` attempts in total.
pub const RETRY_FACTOR: usize = 10;

/// Relative distance tolerance accepted by [`flux_at`].
pub const ON_SPHERE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Sign,
    Normalized,
}

impl StepRule {
    pub fn id(self) -> &'static str {
        match self {
            StepRule::Sign => "sign",
            StepRule::Normalized => "normalized",
        }
    }
}

/// How a candidate point is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// One uniform start, then `steps` recurrence updates.
    Recurrence,
    /// Draw a fresh uniform start before every update; only the last one
    /// counts.
    ResampleEachStep,
    /// No updates: the uniform sample itself is the candidate.
    Uniform,
}

impl SearchMode {
    pub fn id(self) -> &'static str {
        match self {
            SearchMode::Recurrence => "recurrence",
            SearchMode::ResampleEachStep => "resample-each-step",
            SearchMode::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeflagConfig {
    /// Sphere radius.
    pub epsilon: f64,
    /// Number of negative-flux points aggregated.
    pub samples: usize,
    /// Recurrence updates per point.
    pub steps: usize,
    pub step_rule: StepRule,
    pub search: SearchMode,
    pub seed: u64,
    /// Retry candidates whose exact flux is not negative.
    pub reject_nonnegative: bool,
}

impl Default for NeflagConfig {
    fn default() -> Self {
        NeflagConfig {
            epsilon: 0.1,
            samples: 20,
            steps: 1,
            step_rule: StepRule::Sign,
            search: SearchMode::Recurrence,
            seed: 0,
            reject_nonnegative: true,
        }
    }
}

impl NeflagConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// A surface point with its gradient and flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub location: Vec<f64>,
    pub gradient: Vec<f64>,
    /// `(x̃ − x) / |x̃ − x|`
    pub normal: Vec<f64>,
    /// Exact flux `F(x̃)·n̂`.
    pub flux: f64,
    /// First-order estimate `(f(x̃) − f(x)) / |x̃ − x|`.
    pub approx_flux: f64,
}

impl FluxPoint {
    pub fn is_negative(&self) -> bool {
        self.flux < 0.0
    }

    /// `F(x̃) ⊙ (x − x̃)`, this point's term of the attribution sum.
    pub fn contribution(&self, center: &[f64]) -> Vec<f64> {
        hadamard(&self.gradient, &sub(center, &self.location))
    }
}

/// Measures flux at `point` using the normal through `center`, whatever the
/// distance between them.
fn measure(model: &Model, center: &[f64], f_center: f64, point: Vec<f64>) -> Result<FluxPoint> {
    let offset = sub(&point, center);
    let r = norm(&offset);
    if r == 0.0 {
        return Err(Error::StationaryGradient);
    }
    let normal: Vec<f64> = offset.iter().map(|v| v / r).collect();
    let gradient = model.gradient(&point)?;
    let flux = dot(&gradient, &normal);
    let approx_flux = (model.evaluate(&point)? - f_center) / r;
    Ok(FluxPoint {
        location: point,
        gradient,
        normal,
        flux,
        approx_flux,
    })
}

/// Flux of the gradient field through the sphere at `point`.
///
/// `point` must lie on the sphere within [`ON_SPHERE_TOLERANCE`] relative.
pub fn flux_at(model: &Model, sphere: &SphereSpec, point: &[f64]) -> Result<FluxPoint> {
    check_dim(model.dim(), &sphere.center)?;
    check_dim(model.dim(), point)?;
    let d = distance(point, &sphere.center);
    if (d - sphere.radius).abs() > ON_SPHERE_TOLERANCE * sphere.radius {
        return Err(Error::OffSphere {
            distance: d,
            radius: sphere.radius,
        });
    }
    let f_center = model.evaluate(&sphere.center)?;
    measure(model, &sphere.center, f_center, point.to_vec())
}

/// One update of the search recurrence from `prev`.
pub fn recurrence_step(
    model: &Model,
    sphere: &SphereSpec,
    prev: &[f64],
    rule: StepRule,
) -> Result<Vec<f64>> {
    check_dim(model.dim(), &sphere.center)?;
    let g = model.gradient(prev)?;
    let len = norm(&g);
    if len == 0.0 || !len.is_finite() {
        return Err(Error::StationaryGradient);
    }
    let eps = sphere.radius;
    Ok(match rule {
        StepRule::Normalized => sphere
            .center
            .iter()
            .zip(&g)
            .map(|(c, gi)| c - eps * (gi / len))
            .collect(),
        StepRule::Sign => sphere
            .center
            .iter()
            .zip(&g)
            .map(|(c, gi)| c - eps * sign(*gi))
            .collect(),
    })
}

/// Result of one search attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Accepted(FluxPoint),
    /// Final flux was not negative and the config rejects such points.
    Rejected(FluxPoint),
}

/// One search attempt: a uniform start on the sphere followed by the
/// configured updates.
pub fn find_negative_flux_point<R: Rng + ?Sized>(
    model: &Model,
    sphere: &SphereSpec,
    config: &NeflagConfig,
    rng: &mut R,
) -> Result<SearchOutcome> {
    config.validate()?;
    let f_center = model.evaluate(&sphere.center)?;
    let point = match config.search {
        SearchMode::Uniform => sphere.sample(rng),
        SearchMode::Recurrence => {
            let mut p = sphere.sample(rng);
            for _ in 0..config.steps {
                p = recurrence_step(model, sphere, &p, config.step_rule)?;
            }
            p
        }
        SearchMode::ResampleEachStep => {
            let mut p = Vec::new();
            for _ in 0..config.steps {
                let start = sphere.sample(rng);
                p = recurrence_step(model, sphere, &start, config.step_rule)?;
            }
            p
        }
    };
    let fp = measure(model, &sphere.center, f_center, point)?;
    if config.reject_nonnegative && !fp.is_negative() {
        Ok(SearchOutcome::Rejected(fp))
    } else {
        Ok(SearchOutcome::Accepted(fp))
    }
}

/// Largest attempt count a single sample may use so that the other `n − 1`
/// samples (one attempt each at least) still fit in the run budget.
fn per_sample_cap(samples: usize) -> usize {
    RETRY_FACTOR * samples - (samples - 1)
}

/// Searches for the `index`-th accepted point with its own generator, trying
/// at most `cap` candidates. Returns the point and the attempts it took.
fn search_sample(
    model: &Model,
    sphere: &SphereSpec,
    config: &NeflagConfig,
    index: usize,
    cap: usize,
) -> Result<(Option<FluxPoint>, usize)> {
    let mut rng = rng_for(config.seed, stream::NEFLAG, index as u64);
    for attempt in 1..=cap {
        match find_negative_flux_point(model, sphere, config, &mut rng) {
            Ok(SearchOutcome::Accepted(fp)) => return Ok((Some(fp), attempt)),
            Ok(SearchOutcome::Rejected(_)) | Err(Error::StationaryGradient) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((None, cap))
}

/// The `index`-th accepted point of a NeFLAG run. Independent of every other
/// index, so samples can be searched concurrently.
pub fn neflag_sample(
    model: &Model,
    x: &[f64],
    config: &NeflagConfig,
    index: usize,
) -> Result<FluxPoint> {
    config.validate()?;
    let sphere = SphereSpec::new(x.to_vec(), config.epsilon)?;
    let cap = per_sample_cap(config.samples);
    match search_sample(model, &sphere, config, index, cap)? {
        (Some(fp), _) => Ok(fp),
        (None, _) => Err(Error::NoNegativeFlux {
            attempts: RETRY_FACTOR * config.samples,
        }),
    }
}

pub fn neflag_attribute(model: &Model, x: &[f64], config: &NeflagConfig) -> Result<AttributionMap> {
    neflag_attribute_with(model, x, config, &Sequential)
}

/// Sums `F(x̃) ⊙ (x − x̃)` over `config.samples` accepted points, in sample
/// order. The sum is raw: it grows with the sample count.
///
/// Rejected candidates are retried; the run fails with
/// [`Error::NoNegativeFlux`] when the attempts of all samples together exceed
/// `RETRY_FACTOR · n`. Each sample counts its attempts on its own stream, so
/// the outcome does not depend on scheduling.
pub fn neflag_attribute_with<E: Executor>(
    model: &Model,
    x: &[f64],
    config: &NeflagConfig,
    exec: &E,
) -> Result<AttributionMap> {
    config.validate()?;
    model.evaluate(x)?;
    let sphere = SphereSpec::new(x.to_vec(), config.epsilon)?;
    let cap = per_sample_cap(config.samples);
    let budget = RETRY_FACTOR * config.samples;
    let searched = exec.map(config.samples, |i| {
        search_sample(model, &sphere, config, i, cap)
    });
    let mut points = Vec::with_capacity(config.samples);
    let mut attempts = 0;
    for s in searched {
        let (point, used) = s?;
        attempts += used;
        points.extend(point);
    }
    if points.len() < config.samples || attempts > budget {
        return Err(Error::NoNegativeFlux { attempts: budget });
    }
    let mut values: Option<Vec<f64>> = None;
    for p in points {
        let c = p.contribution(x);
        match values.as_mut() {
            None => values = Some(c),
            Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, v)| *a += v),
        }
    }
    let values = values.expect("samples >= 1");
    Ok(AttributionMap::new(Method::Neflag, values)
        .with_param("epsilon", config.epsilon)
        .with_param("samples", config.samples)
        .with_param("steps", config.steps)
        .with_param("step_rule", config.step_rule.id())
        .with_param("search", config.search.id())
        .with_param("seed", config.seed)
        .with_param("reject_nonnegative", config.reject_nonnegative)
        .with_samples(config.samples))
}

/// First-order Taylor heatmap `∇f(root) ⊙ (x − root)`.
pub fn taylor_heatmap(model: &Model, x: &[f64], root: &[f64]) -> Result<AttributionMap> {
    model.evaluate(x)?;
    let g = model.gradient(root)?;
    let values = hadamard(&g, &sub(x, root));
    Ok(AttributionMap::new(Method::Taylor, values).with_samples(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sphere(center: Vec<f64>, r: f64) -> SphereSpec {
        SphereSpec::new(center, r).unwrap()
    }

    #[test]
    fn flux_on_linear_field() {
        let m = Model::linear(vec![1.0, 0.0], 0.0).unwrap();
        let s = sphere(vec![0.0, 0.0], 0.1);
        let out = flux_at(&m, &s, &[0.1, 0.0]).unwrap();
        assert!((out.flux - 1.0).abs() < 1e-15);
        assert!((out.approx_flux - 1.0).abs() < 1e-12);
        let inward = flux_at(&m, &s, &[-0.1, 0.0]).unwrap();
        assert!((inward.flux + 1.0).abs() < 1e-15);
        assert!(inward.is_negative());
    }

    #[test]
    fn flux_on_quadratic_exposes_first_order_error() {
        let m = Model::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let s = sphere(vec![0.0, 0.0], 0.1);
        let out = flux_at(&m, &s, &[0.1, 0.0]).unwrap();
        assert!((out.flux - 0.1).abs() < 1e-15);
        assert!((out.approx_flux - 0.05).abs() < 1e-15);
    }

    #[test]
    fn off_sphere_point_rejected() {
        let m = Model::linear(vec![1.0, 0.0], 0.0).unwrap();
        let s = sphere(vec![0.0, 0.0], 0.1);
        assert!(matches!(
            flux_at(&m, &s, &[0.2, 0.0]),
            Err(Error::OffSphere { .. })
        ));
        assert!(flux_at(&m, &s, &[0.1 * (1.0 + 1e-8), 0.0]).is_ok());
    }

    #[test]
    fn recurrence_examples() {
        let m = Model::linear(vec![3.0, 4.0], 0.0).unwrap();
        let s = sphere(vec![0.0, 0.0], 1.0);
        let n = recurrence_step(&m, &s, &[1.0, 0.0], StepRule::Normalized).unwrap();
        assert!((n[0] + 0.6).abs() < 1e-15 && (n[1] + 0.8).abs() < 1e-15);
        let sg = recurrence_step(&m, &s, &[1.0, 0.0], StepRule::Sign).unwrap();
        assert_eq!(sg, vec![-1.0, -1.0]);
    }

    #[test]
    fn sign_of_zero_component_is_no_step() {
        let m = Model::linear(vec![2.0, 0.0], 0.0).unwrap();
        let s = sphere(vec![1.0, 1.0], 0.5);
        let p = recurrence_step(&m, &s, &[1.5, 1.0], StepRule::Sign).unwrap();
        assert_eq!(p, vec![0.5, 1.0]);
    }

    #[test]
    fn stationary_gradient_cannot_step() {
        let m = Model::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let s = sphere(vec![1.0, 0.0], 1.0);
        assert_eq!(
            recurrence_step(&m, &s, &[0.0, 0.0], StepRule::Normalized),
            Err(Error::StationaryGradient)
        );
    }

    #[test]
    fn one_step_on_linear_field_lands_opposite_gradient() {
        let m = Model::linear(vec![1.0, 0.0], 0.0).unwrap();
        let s = sphere(vec![0.0, 0.0], 0.1);
        let cfg = NeflagConfig {
            steps: 1,
            step_rule: StepRule::Normalized,
            ..NeflagConfig::default()
        };
        let mut rng = rng_for(4, 0, 0);
        match find_negative_flux_point(&m, &s, &cfg, &mut rng).unwrap() {
            SearchOutcome::Accepted(fp) => {
                assert_eq!(fp.location, vec![-0.1, 0.0]);
                assert!((fp.flux + 1.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimum_has_no_negative_flux() {
        let m = Model::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        for steps in [1, 5] {
            let cfg = NeflagConfig {
                steps,
                step_rule: StepRule::Normalized,
                reject_nonnegative: true,
                ..NeflagConfig::default()
            };
            let err = neflag_attribute(&m, &[0.0, 0.0], &cfg).unwrap_err();
            assert_eq!(err, Error::NoNegativeFlux { attempts: 200 });
        }
    }

    #[test]
    fn attribute_hand_traces() {
        let m = Model::linear(vec![1.0, 0.0], 0.0).unwrap();
        let cfg = NeflagConfig {
            epsilon: 0.1,
            samples: 1,
            steps: 1,
            step_rule: StepRule::Normalized,
            ..NeflagConfig::default()
        };
        let map = neflag_attribute(&m, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(map.values, vec![0.1, 0.0]);
        assert_eq!(map.samples_used, 1);

        let m = Model::linear(vec![3.0, 4.0], 0.0).unwrap();
        let cfg = NeflagConfig {
            epsilon: 1.0,
            samples: 1,
            steps: 1,
            step_rule: StepRule::Sign,
            ..NeflagConfig::default()
        };
        let map = neflag_attribute(&m, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(map.values, vec![3.0, 4.0]);
    }

    #[test]
    fn invalid_config_rejected() {
        let m = Model::linear(vec![1.0], 0.0).unwrap();
        for cfg in [
            NeflagConfig {
                epsilon: 0.0,
                ..NeflagConfig::default()
            },
            NeflagConfig {
                samples: 0,
                ..NeflagConfig::default()
            },
            NeflagConfig {
                steps: 0,
                ..NeflagConfig::default()
            },
        ] {
            assert!(matches!(
                neflag_attribute(&m, &[0.0], &cfg),
                Err(Error::Invalid { .. })
            ));
        }
        assert!(neflag_attribute(&m, &[0.0, 1.0], &NeflagConfig::default()).is_err());
    }

    #[test]
    fn taylor_examples() {
        let m = Model::linear(vec![2.0, 5.0], 0.0).unwrap();
        let map = taylor_heatmap(&m, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(map.values, vec![2.0, 5.0]);
        let zero = taylor_heatmap(&m, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(zero.values, vec![0.0, 0.0]);
        assert!(taylor_heatmap(&m, &[1.0, 1.0], &[1.0]).is_err());
    }
}
