use alloc::vec::Vec;

use super::Model;
use crate::error::{Error, Result};

/// Central-difference gradient `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
///
/// Independent of the analytic gradient path; used to check it.
pub fn fd_gradient(model: &Model, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "step must be positive"));
    }
    model.evaluate(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = model.evaluate(&probe)?;
        probe[i] = orig - h;
        let down = model.evaluate(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
