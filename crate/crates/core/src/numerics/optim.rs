use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::tape::ParamSet;

pub const DEFAULT_CLIP_NORM: f64 = 5.0;

/// Plain SGD with global-norm gradient clipping. Returns the gradient norm
/// measured before clipping. Gradients are zeroed afterwards.
pub fn sgd_step<T: Scalar>(params: &mut ParamSet<T>, lr: T, clip_norm: T) -> Result<T> {
    if !(lr > T::zero()) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    if !(clip_norm > T::zero()) {
        return Err(Error::Config(format!("clip norm must be positive, got {clip_norm}")));
    }
    let norm = params.grad_norm();
    if !norm.is_finite() {
        return Err(Error::Numeric(format!("gradient norm is {norm}")));
    }
    let scale = if norm > clip_norm { clip_norm / norm } else { T::one() };
    for p in params.iter_mut() {
        for (v, g) in p.value.as_mut_slice().iter_mut().zip(p.grad.as_mut_slice()) {
            *v -= lr * (*g * scale);
            *g = T::zero();
        }
    }
    Ok(norm)
}
