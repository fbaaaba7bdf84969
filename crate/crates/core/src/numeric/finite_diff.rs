use crate::error::{contract, Error, Result};

use super::network::{GradientSet, ParameterSet};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of `loss_fn` at `params`.
///
/// Test oracle only: it costs two loss evaluations per coordinate.
pub fn finite_diff_gradient<F>(mut loss_fn: F, params: &ParameterSet, h: f64) -> Result<GradientSet>
where
    F: FnMut(&ParameterSet) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(contract(format!("step size must be positive, got {h}")));
    }
    let mut probe = params.clone();
    let mut grads = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let original = probe.as_slice()[i];
        probe.as_mut_slice()[i] = original + h;
        let plus = loss_fn(&probe);
        probe.as_mut_slice()[i] = original - h;
        let minus = loss_fn(&probe);
        probe.as_mut_slice()[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Oracle(format!("loss is not finite around coordinate {i}")));
        }
        grads.push((plus - minus) / (2.0 * h));
    }
    Ok(GradientSet::new(grads))
}

/// `|a - b| / max(|a|, |b|, floor)`; the floor keeps near-zero coordinates
/// from dominating.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_relative_error(a: &GradientSet, b: &GradientSet, floor: f64) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| relative_error(x, y, floor))
        .fold(0.0, f64::max)
}
