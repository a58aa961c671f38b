//! Deletion and insertion curves over an attribution ordering, and the
//! per-method benchmark table built from them.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMap, Method};
use crate::baselines::{
    integrated_gradients, random_attribution, saliency, smoothgrad, IgConfig, SmoothGradConfig,
};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, stream, Executor, Sequential};
use crate::gradfield::Model;
use crate::linalg::{check_dim, hadamard, mean_variance};
use crate::neflag::{neflag_attribute, taylor_heatmap, NeflagConfig};

/// What a removed feature is replaced with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replacement {
    /// Zero.
    Black,
    /// Mean of the input's features.
    Mean,
    /// Box-blurred input (3 passes); needs grid dims.
    Blur,
}

impl Replacement {
    pub fn id(self) -> &'static str {
        match self {
            Replacement::Black => "black",
            Replacement::Mean => "mean",
            Replacement::Blur => "blur",
        }
    }
}

/// Feature ranking key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankBy {
    Signed,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub replacement: Replacement,
    pub features_per_step: usize,
    pub grid: Option<Grid>,
    pub blur_radius: usize,
    pub rank_by: RankBy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            replacement: Replacement::Black,
            features_per_step: 1,
            grid: None,
            blur_radius: 2,
            rank_by: RankBy::Signed,
        }
    }
}

/// Model score against fraction of features perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    pub fractions: Vec<f64>,
    pub scores: Vec<f64>,
    pub auc: f64,
}

/// Feature indices by descending key; ties by ascending index.
pub fn feature_order(values: &[f64], rank_by: RankBy) -> Vec<usize> {
    let key = |i: usize| match rank_by {
        RankBy::Signed => values[i],
        RankBy::Absolute => values[i].abs(),
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order
}

/// Trapezoidal area under `scores` over `fractions`.
pub fn trapezoid(fractions: &[f64], scores: &[f64]) -> f64 {
    fractions
        .windows(2)
        .zip(scores.windows(2))
        .map(|(f, s)| (f[1] - f[0]) * (s[0] + s[1]) / 2.0)
        .sum()
}

fn box_blur_pass(src: &[f64], grid: Grid, radius: usize) -> Vec<f64> {
    let (h, w) = (grid.height, grid.width);
    let mut horiz = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(w - 1);
            let sum: f64 = (lo..=hi).map(|k| src[r * w + k]).sum();
            horiz[r * w + c] = sum / (hi - lo + 1) as f64;
        }
    }
    let mut out = vec![0.0; src.len()];
    for c in 0..w {
        for r in 0..h {
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(h - 1);
            let sum: f64 = (lo..=hi).map(|k| horiz[k * w + c]).sum();
            out[r * w + c] = sum / (hi - lo + 1) as f64;
        }
    }
    out
}

/// Three box-blur passes, approximating a Gaussian blur. Edges average over
/// the in-bounds part of the window.
pub fn box_blur(x: &[f64], grid: Grid, radius: usize) -> Result<Vec<f64>> {
    if grid.height * grid.width != x.len() || x.is_empty() {
        return Err(Error::invalid(
            "grid",
            alloc::format!(
                "{}x{} does not match {} features",
                grid.height,
                grid.width,
                x.len()
            ),
        ));
    }
    let mut out = x.to_vec();
    for _ in 0..3 {
        out = box_blur_pass(&out, grid, radius);
    }
    Ok(out)
}

/// Per-feature replacement values for `x`.
pub fn replacement_values(x: &[f64], cfg: &EvalConfig) -> Result<Vec<f64>> {
    match cfg.replacement {
        Replacement::Black => Ok(vec![0.0; x.len()]),
        Replacement::Mean => {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            Ok(vec![mean; x.len()])
        }
        Replacement::Blur => match cfg.grid {
            Some(grid) => box_blur(x, grid, cfg.blur_radius),
            None => Err(Error::invalid("replacement", "blur needs grid dims")),
        },
    }
}

fn curve(
    model: &Model,
    x: &[f64],
    attribution: &AttributionMap,
    cfg: &EvalConfig,
    deletion: bool,
) -> Result<EvalCurve> {
    check_dim(model.dim(), x)?;
    check_dim(x.len(), &attribution.values)?;
    if cfg.features_per_step == 0 {
        return Err(Error::invalid("features_per_step", "must be at least 1"));
    }
    let replaced = replacement_values(x, cfg)?;
    let order = feature_order(&attribution.values, cfg.rank_by);
    let (target, source) = if deletion {
        (&replaced, x)
    } else {
        (&x.to_vec(), &replaced[..])
    };
    let mut current = source.to_vec();
    let n = x.len();
    let mut fractions = vec![0.0];
    let mut scores = vec![model.evaluate(&current)?];
    let mut done = 0;
    for chunk in order.chunks(cfg.features_per_step) {
        for &i in chunk {
            current[i] = target[i];
        }
        done += chunk.len();
        fractions.push(done as f64 / n as f64);
        scores.push(model.evaluate(&current)?);
    }
    let auc = trapezoid(&fractions, &scores);
    Ok(EvalCurve {
        fractions,
        scores,
        auc,
    })
}

/// Progressively replaces the highest-ranked features; lower AUC is better.
pub fn deletion_curve(
    model: &Model,
    x: &[f64],
    attribution: &AttributionMap,
    cfg: &EvalConfig,
) -> Result<EvalCurve> {
    curve(model, x, attribution, cfg, true)
}

/// Starts fully replaced and restores the highest-ranked features first;
/// higher AUC is better.
pub fn insertion_curve(
    model: &Model,
    x: &[f64],
    attribution: &AttributionMap,
    cfg: &EvalConfig,
) -> Result<EvalCurve> {
    curve(model, x, attribution, cfg, false)
}

/// Insertion AUC minus deletion AUC.
pub fn difference_score(
    model: &Model,
    x: &[f64],
    attribution: &AttributionMap,
    cfg: &EvalConfig,
) -> Result<f64> {
    Ok(insertion_curve(model, x, attribution, cfg)?.auc
        - deletion_curve(model, x, attribution, cfg)?.auc)
}

/// An attribution method with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    Neflag(NeflagConfig),
    Ig(IgConfig),
    Smoothgrad(SmoothGradConfig),
    Saliency,
    /// Taylor heatmap rooted at `root` (zero vector when absent).
    Taylor {
        root: Option<Vec<f64>>,
    },
    Random,
    /// `weights ⊙ x`, e.g. the true coefficients of a known model.
    Reference {
        weights: Vec<f64>,
    },
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Neflag(_) => Method::Neflag,
            MethodSpec::Ig(_) => Method::Ig,
            MethodSpec::Smoothgrad(_) => Method::Smoothgrad,
            MethodSpec::Saliency => Method::Saliency,
            MethodSpec::Taylor { .. } => Method::Taylor,
            MethodSpec::Random => Method::Random,
            MethodSpec::Reference { .. } => Method::Reference,
        }
    }
}

/// Runs `spec` on `x`. `seed` overrides the seed of stochastic methods;
/// `index` selects the random-attribution stream.
pub fn attribute(
    model: &Model,
    x: &[f64],
    spec: &MethodSpec,
    seed: u64,
    index: u64,
) -> Result<AttributionMap> {
    match spec {
        MethodSpec::Neflag(cfg) => neflag_attribute(model, x, &NeflagConfig { seed, ..*cfg }),
        MethodSpec::Ig(cfg) => integrated_gradients(model, x, cfg),
        MethodSpec::Smoothgrad(cfg) => smoothgrad(model, x, &SmoothGradConfig { seed, ..*cfg }),
        MethodSpec::Saliency => saliency(model, x),
        MethodSpec::Taylor { root } => {
            let zero;
            let root = match root {
                Some(r) => r.as_slice(),
                None => {
                    zero = vec![0.0; x.len()];
                    zero.as_slice()
                }
            };
            taylor_heatmap(model, x, root)
        }
        MethodSpec::Random => {
            model.evaluate(x)?;
            Ok(random_attribution(x.len(), seed, index))
        }
        MethodSpec::Reference { weights } => {
            check_dim(x.len(), weights)?;
            model.evaluate(x)?;
            Ok(AttributionMap::new(Method::Reference, hadamard(weights, x)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMethod {
    pub label: String,
    pub spec: MethodSpec,
}

impl From<MethodSpec> for BenchMethod {
    fn from(spec: MethodSpec) -> Self {
        BenchMethod {
            label: spec.method().id().to_string(),
            spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Replacement used in each round; scores are averaged over rounds.
    pub rounds: Vec<Replacement>,
    pub eval: EvalConfig,
    /// Keep the per-round curves in the sample records.
    pub keep_curves: bool,
}

impl BenchConfig {
    /// Black replacement, then blur on grid inputs or mean otherwise.
    pub fn two_round(grid: Option<Grid>) -> Self {
        let second = if grid.is_some() {
            Replacement::Blur
        } else {
            Replacement::Mean
        };
        BenchConfig {
            rounds: vec![Replacement::Black, second],
            eval: EvalConfig {
                grid,
                ..EvalConfig::default()
            },
            keep_curves: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundCurves {
    pub replacement: Replacement,
    pub deletion: EvalCurve,
    pub insertion: EvalCurve,
}

/// Outcome of one method on one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub label: String,
    pub input: usize,
    pub deletion: Option<f64>,
    pub insertion: Option<f64>,
    pub difference: Option<f64>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<RoundCurves>,
}

/// Mean and standard error; NaN when nothing succeeded (JSON `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    #[serde(deserialize_with = "nan_if_null")]
    pub mean: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub stderr: f64,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> core::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl MetricStat {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MetricStat {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let (mean, var) = mean_variance(values);
        MetricStat {
            mean,
            stderr: libm::sqrt(var / values.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub label: String,
    pub method: Method,
    pub deletion: MetricStat,
    pub insertion: MetricStat,
    pub difference: MetricStat,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rounds: Vec<Replacement>,
    pub rows: Vec<MethodRow>,
    pub samples: Vec<SampleRecord>,
}

impl BenchmarkReport {
    pub fn row(&self, label: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Total successful (method, input) evaluations.
    pub fn succeeded(&self) -> usize {
        self.rows.iter().map(|r| r.succeeded).sum()
    }
}

fn evaluate_sample(
    model: &Model,
    x: &[f64],
    method: &BenchMethod,
    cfg: &BenchConfig,
    seed: u64,
    input: usize,
) -> SampleRecord {
    let mut record = SampleRecord {
        label: method.label.clone(),
        input,
        deletion: None,
        insertion: None,
        difference: None,
        error: None,
        curves: Vec::new(),
    };
    let run = || -> Result<(f64, f64, Vec<RoundCurves>)> {
        let map = attribute(model, x, &method.spec, seed, input as u64)?;
        let (mut del, mut ins) = (0.0, 0.0);
        let mut curves = Vec::new();
        for &replacement in &cfg.rounds {
            let eval = EvalConfig {
                replacement,
                ..cfg.eval
            };
            let d = deletion_curve(model, x, &map, &eval)?;
            let i = insertion_curve(model, x, &map, &eval)?;
            del += d.auc;
            ins += i.auc;
            if cfg.keep_curves {
                curves.push(RoundCurves {
                    replacement,
                    deletion: d,
                    insertion: i,
                });
            }
        }
        let rounds = cfg.rounds.len() as f64;
        Ok((del / rounds, ins / rounds, curves))
    };
    match run() {
        Ok((d, i, curves)) => {
            record.deletion = Some(d);
            record.insertion = Some(i);
            record.difference = Some(i - d);
            record.curves = curves;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

pub fn benchmark(
    model: &Model,
    inputs: &[Vec<f64>],
    methods: &[BenchMethod],
    cfg: &BenchConfig,
    seed: u64,
) -> Result<BenchmarkReport> {
    benchmark_with(model, inputs, methods, cfg, seed, &Sequential)
}

/// Mean deletion, insertion and difference scores per method, averaged over
/// the configured replacement rounds. Failures are recorded per sample.
pub fn benchmark_with<E: Executor>(
    model: &Model,
    inputs: &[Vec<f64>],
    methods: &[BenchMethod],
    cfg: &BenchConfig,
    seed: u64,
    exec: &E,
) -> Result<BenchmarkReport> {
    if inputs.is_empty() {
        return Err(Error::invalid("inputs", "empty"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("methods", "empty"));
    }
    if cfg.rounds.is_empty() {
        return Err(Error::invalid("rounds", "empty"));
    }
    let per_input = exec.map(inputs.len(), |i| {
        let input_seed = derive_seed(seed, stream::BENCH, i as u64);
        methods
            .iter()
            .map(|m| evaluate_sample(model, &inputs[i], m, cfg, input_seed, i))
            .collect::<Vec<_>>()
    });
    let rows = methods
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let records: Vec<&SampleRecord> = per_input.iter().map(|r| &r[j]).collect();
            let pick = |f: fn(&SampleRecord) -> Option<f64>| -> Vec<f64> {
                records.iter().filter_map(|r| f(r)).collect()
            };
            let deletion = pick(|r| r.deletion);
            MethodRow {
                label: m.label.clone(),
                method: m.spec.method(),
                insertion: MetricStat::of(&pick(|r| r.insertion)),
                difference: MetricStat::of(&pick(|r| r.difference)),
                succeeded: deletion.len(),
                failed: records.len() - deletion.len(),
                deletion: MetricStat::of(&deletion),
            }
        })
        .collect();
    let samples = per_input.into_iter().flatten().collect();
    Ok(BenchmarkReport {
        rounds: cfg.rounds.clone(),
        rows,
        samples,
    })
}
