use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::mlp::{sigmoid, MlpParams};
use crate::error::{Error, Result};
use crate::linalg::{check_dim, check_finite, dot};

/// `f(x) = a·x + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub a: Vec<f64>,
    pub b: f64,
}

/// `f(x) = ½ Σ λᵢ (xᵢ − cᵢ)²`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticParams {
    pub lambda: Vec<f64>,
    pub c: Vec<f64>,
}

/// One isotropic bump `weight · exp(−|x − center|² / (2 width²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent {
    pub weight: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussMixtureParams {
    pub components: Vec<GaussComponent>,
}

/// The raw function before the output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum Field {
    Linear(LinearParams),
    Quadratic(QuadraticParams),
    GaussMixture(GaussMixtureParams),
    Mlp(MlpParams),
}

/// Maps raw output(s) to the explained scalar.
///
/// `Softmax` explains the post-softmax probability of `target`; `Logit`
/// explains the pre-softmax logit of `target`. Both need a vector-valued MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Head {
    Identity,
    Sigmoid,
    Softmax { target: usize },
    Logit { target: usize },
}

/// A scalar-valued differentiable model with exact gradient.
///
/// Immutable after construction and `Sync`, so it can be shared by many
/// threads evaluating concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct Model {
    dim: usize,
    head: Head,
    field: Field,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    #[serde(flatten)]
    field: Field,
    dim: usize,
    head: Head,
}

impl TryFrom<ModelDoc> for Model {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        Model::new(doc.dim, doc.field, doc.head)
    }
}

impl From<Model> for ModelDoc {
    fn from(m: Model) -> Self {
        ModelDoc {
            field: m.field,
            dim: m.dim,
            head: m.head,
        }
    }
}

fn check_len(field: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::invalid(
            field,
            format!("length {} does not match dim {}", v.len(), dim),
        ));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid(field, "non-finite entry"));
    }
    Ok(())
}

impl Model {
    pub fn new(dim: usize, field: Field, head: Head) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        let outputs = match &field {
            Field::Linear(p) => {
                check_len("params.a", &p.a, dim)?;
                if !p.b.is_finite() {
                    return Err(Error::invalid("params.b", "non-finite"));
                }
                1
            }
            Field::Quadratic(p) => {
                check_len("params.lambda", &p.lambda, dim)?;
                check_len("params.c", &p.c, dim)?;
                1
            }
            Field::GaussMixture(p) => {
                if p.components.is_empty() {
                    return Err(Error::invalid("params.components", "empty"));
                }
                for c in &p.components {
                    check_len("params.components.center", &c.center, dim)?;
                    if !(c.width > 0.0 && c.width.is_finite()) || !c.weight.is_finite() {
                        return Err(Error::invalid(
                            "params.components",
                            "width must be positive and weight finite",
                        ));
                    }
                }
                1
            }
            Field::Mlp(p) => {
                p.validate(dim)?;
                p.output_dim()
            }
        };
        match head {
            Head::Identity | Head::Sigmoid if outputs != 1 => {
                return Err(Error::invalid(
                    "head",
                    format!("identity/sigmoid head needs a scalar output, model has {outputs}"),
                ));
            }
            Head::Softmax { target } | Head::Logit { target } => {
                if outputs < 2 {
                    return Err(Error::invalid(
                        "head",
                        "softmax/logit head needs K >= 2 logits",
                    ));
                }
                if target >= outputs {
                    return Err(Error::invalid(
                        "head.target",
                        format!("target {target} out of range for {outputs} logits"),
                    ));
                }
            }
            _ => {}
        }
        Ok(Model { dim, head, field })
    }

    pub fn linear(a: Vec<f64>, b: f64) -> Result<Self> {
        Model::new(
            a.len(),
            Field::Linear(LinearParams { a, b }),
            Head::Identity,
        )
    }

    pub fn quadratic(lambda: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        Model::new(
            lambda.len(),
            Field::Quadratic(QuadraticParams { lambda, c }),
            Head::Identity,
        )
    }

    /// `exp(−|x|²/2)` in `dim` dimensions.
    pub fn gauss_bump(dim: usize) -> Result<Self> {
        Model::new(
            dim,
            Field::GaussMixture(GaussMixtureParams {
                components: vec![GaussComponent {
                    weight: 1.0,
                    center: vec![0.0; dim],
                    width: 1.0,
                }],
            }),
            Head::Identity,
        )
    }

    pub fn mlp(dim: usize, params: MlpParams, head: Head) -> Result<Self> {
        Model::new(dim, Field::Mlp(params), head)
    }

    /// Same field with a different head.
    pub fn with_head(&self, head: Head) -> Result<Self> {
        Model::new(self.dim, self.field.clone(), head)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// False when any layer uses relu: the gradient field then has kinks and
    /// second-derivative checks are meaningless.
    pub fn is_smooth(&self) -> bool {
        !matches!(&self.field, Field::Mlp(p) if p.uses_relu())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x)?;
        check_finite(x)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.gradient_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match &self.field {
            Field::Mlp(p) => {
                let trace = p.forward(x);
                head_value(self.head, trace.logits())
            }
            field => head_value(self.head, &[scalar_value(field, x)]),
        }
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.field {
            Field::Mlp(p) => {
                let trace = p.forward(x);
                let d_logits = head_derivative(self.head, trace.logits());
                p.backward(&trace, &d_logits, None)
            }
            field => {
                let z = scalar_value(field, x);
                let scale = head_derivative(self.head, &[z])[0];
                let mut g = scalar_gradient(field, x);
                if scale != 1.0 {
                    g.iter_mut().for_each(|v| *v *= scale);
                }
                g
            }
        }
    }
}

fn scalar_value(field: &Field, x: &[f64]) -> f64 {
    match field {
        Field::Linear(p) => dot(&p.a, x) + p.b,
        Field::Quadratic(p) => {
            0.5 * p
                .lambda
                .iter()
                .zip(&p.c)
                .zip(x)
                .map(|((l, c), xi)| l * (xi - c) * (xi - c))
                .sum::<f64>()
        }
        Field::GaussMixture(p) => p
            .components
            .iter()
            .map(|c| c.weight * gauss_kernel(c, x))
            .sum(),
        Field::Mlp(_) => unreachable!("mlp output is vector-valued"),
    }
}

fn gauss_kernel(c: &GaussComponent, x: &[f64]) -> f64 {
    let r2: f64 = c.center.iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
    libm::exp(-r2 / (2.0 * c.width * c.width))
}

fn scalar_gradient(field: &Field, x: &[f64]) -> Vec<f64> {
    match field {
        Field::Linear(p) => p.a.clone(),
        Field::Quadratic(p) => p
            .lambda
            .iter()
            .zip(&p.c)
            .zip(x)
            .map(|((l, c), xi)| l * (xi - c))
            .collect(),
        Field::GaussMixture(p) => {
            let mut g = vec![0.0; x.len()];
            for c in &p.components {
                let k = c.weight * gauss_kernel(c, x) / (c.width * c.width);
                for ((gi, xi), m) in g.iter_mut().zip(x).zip(&c.center) {
                    *gi -= k * (xi - m);
                }
            }
            g
        }
        Field::Mlp(_) => unreachable!("mlp output is vector-valued"),
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| libm::exp(v - max)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn head_value(head: Head, z: &[f64]) -> f64 {
    match head {
        Head::Identity => z[0],
        Head::Sigmoid => sigmoid(z[0]),
        Head::Softmax { target } => softmax(z)[target],
        Head::Logit { target } => z[target],
    }
}

/// d(head output) / d(logits).
fn head_derivative(head: Head, z: &[f64]) -> Vec<f64> {
    match head {
        Head::Identity => vec![1.0],
        Head::Sigmoid => {
            let s = sigmoid(z[0]);
            vec![s * (1.0 - s)]
        }
        Head::Softmax { target } => {
            let p = softmax(z);
            let pt = p[target];
            p.iter()
                .enumerate()
                .map(|(j, &pj)| {
                    if j == target {
                        pt * (1.0 - pt)
                    } else {
                        -pt * pj
                    }
                })
                .collect()
        }
        Head::Logit { target } => {
            let mut g = vec![0.0; z.len()];
            g[target] = 1.0;
            g
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradfield::{fd_gradient, Activation, Layer};

    fn tanh_mlp() -> Model {
        let params = MlpParams {
            layers: vec![
                Layer {
                    weights: vec![
                        vec![0.5, -1.2, 0.3],
                        vec![0.9, 0.4, -0.7],
                        vec![-0.2, 0.8, 1.1],
                    ],
                    bias: vec![0.1, -0.3, 0.2],
                    activation: Activation::Tanh,
                },
                Layer {
                    weights: vec![vec![1.3, -0.6, 0.7]],
                    bias: vec![0.05],
                    activation: Activation::Identity,
                },
            ],
        };
        Model::mlp(3, params, Head::Identity).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let m = Model::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(m.evaluate(&[3.0, 4.0]).unwrap(), 11.0);

        let q = Model::quadratic(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(q.evaluate(&[0.0, 0.0]).unwrap(), 0.0);

        let s = Model::linear(vec![1.0, 0.0], 0.0)
            .unwrap()
            .with_head(Head::Sigmoid)
            .unwrap();
        assert_eq!(s.evaluate(&[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn gradient_examples() {
        let m = Model::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(m.gradient(&[-7.0, 0.25]).unwrap(), vec![1.0, 2.0]);

        let q = Model::quadratic(vec![2.0, 3.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(q.gradient(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn tanh_mlp_gradient_matches_central_differences() {
        let m = tanh_mlp();
        let x = [0.37, -0.81, 0.12];
        let g = m.gradient(&x).unwrap();
        let fd = fd_gradient(&m, &x, 1e-5).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch_and_nan_are_errors() {
        let m = Model::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(
            m.evaluate(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            m.gradient(&[1.0, f64::INFINITY]),
            Err(Error::NonFiniteInput { index: 1 })
        );
        assert!(m.evaluate(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(Model::linear(vec![], 0.0).is_err());
    }

    #[test]
    fn head_compatibility_checked() {
        let m = tanh_mlp();
        assert!(m.with_head(Head::Softmax { target: 0 }).is_err());
        let lin = Model::linear(vec![1.0], 0.0).unwrap();
        assert!(lin.with_head(Head::Logit { target: 0 }).is_err());
    }

    #[test]
    fn softmax_and_logit_heads() {
        let params = MlpParams {
            layers: vec![Layer {
                weights: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
                bias: vec![0.0, 0.0, 0.0],
                activation: Activation::Identity,
            }],
        };
        let sm = Model::mlp(2, params.clone(), Head::Softmax { target: 2 }).unwrap();
        let x = [0.3, -0.4];
        let p = sm.evaluate(&x).unwrap();
        let z = [0.3, -0.4, -0.1];
        let denom: f64 = z.iter().map(|v: &f64| v.exp()).sum();
        assert!((p - (-0.1f64).exp() / denom).abs() < 1e-15);
        assert!(p > 0.0 && p < 1.0);
        let fd = fd_gradient(&sm, &x, 1e-5).unwrap();
        for (a, b) in sm.gradient(&x).unwrap().iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9);
        }

        let lg = Model::mlp(2, params, Head::Logit { target: 2 }).unwrap();
        assert!((lg.evaluate(&x).unwrap() - (0.3 - 0.4)).abs() < 1e-15);
        assert_eq!(lg.gradient(&x).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gauss_bump_values() {
        let g = Model::gauss_bump(2).unwrap();
        assert_eq!(g.evaluate(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(g.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let v = g.evaluate(&[1.0, 0.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn relu_marks_model_non_smooth() {
        let params = MlpParams {
            layers: vec![
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                    activation: Activation::Relu,
                },
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                    activation: Activation::Identity,
                },
            ],
        };
        assert!(!Model::mlp(1, params, Head::Identity).unwrap().is_smooth());
        assert!(tanh_mlp().is_smooth());
    }
}
