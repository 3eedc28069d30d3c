use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    SoftmaxRows,
    LogSoftmaxRows,
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let s: T = xs.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}

pub(crate) fn log_softmax_in_place<T: Scalar>(row: &mut [T]) {
    let lse = log_sum_exp(row);
    for v in row.iter_mut() {
        *v -= lse;
    }
}

/// Elementwise or row-normalising activation. Non-finite input is rejected.
pub fn activate<T: Scalar>(x: &Matrix<T>, kind: Activation) -> Result<Matrix<T>> {
    if !x.is_finite() {
        return Err(Error::Numeric(format!(
            "{kind:?} received a non-finite input"
        )));
    }
    Ok(apply(x, kind))
}

pub(crate) fn apply<T: Scalar>(x: &Matrix<T>, kind: Activation) -> Matrix<T> {
    match kind {
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Tanh => x.map(T::tanh),
        Activation::SoftmaxRows => {
            let mut out = x.clone();
            for r in 0..out.rows() {
                softmax_in_place(out.row_mut(r));
            }
            out
        }
        Activation::LogSoftmaxRows => {
            let mut out = x.clone();
            for r in 0..out.rows() {
                log_softmax_in_place(out.row_mut(r));
            }
            out
        }
    }
}
