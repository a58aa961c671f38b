//! Differentiable scalar models `f: R^N -> R` and their gradient fields.

pub mod datasets;
mod fd;
mod mlp;
mod model;
mod train;

pub use fd::fd_gradient;
pub use mlp::{Activation, Layer, MlpParams};
pub use model::{
    Field, GaussComponent, GaussMixtureParams, Head, LinearParams, Model, QuadraticParams,
};
pub use train::{fit_toy_model, Dataset, MlpArch, TrainConfig, TrainedModel};
