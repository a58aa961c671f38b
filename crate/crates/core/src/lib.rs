//! Feature attribution by aggregating negative gradient flux on a small
//! sphere around the explained input.
//!
//! The crate is `no_std` and needs only `alloc`. It contains:
//!
//! * [`gradfield`]: differentiable models with exact gradients, a
//!   finite-difference checker and a tiny full-batch MLP trainer.
//! * [`neflag`]: sphere search for negative-flux points and their aggregation
//!   into an attribution map, plus the first-order Taylor heatmap.
//! * [`divergence`]: Monte-Carlo volume and surface integrators used to check
//!   the divergence theorem on small fields.
//! * [`baselines`]: saliency, SmoothGrad and integrated gradients.
//! * [`evalkit`]: deletion/insertion curves and the benchmark table.
//!
//! File formats, parallel execution and the command line live in the
//! `fluxgrad` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod baselines;
pub mod divergence;
mod error;
pub mod evalkit;
pub mod exec;
pub mod gradfield;
pub mod linalg;
pub mod neflag;
pub mod sphere;

pub use attribution::{AttributionMap, Method, Param};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use gradfield::{Activation, Head, Model};
pub use sphere::{BallSpec, SphereSpec};
