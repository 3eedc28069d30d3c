//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::scalar::Scalar;

use super::tape::{ParamSet, Tape, Var};

/// One checked coordinate.
#[derive(Debug, Clone)]
pub struct CoordCheck<T> {
    pub param: String,
    pub index: usize,
    pub analytic: T,
    pub numeric: T,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport<T> {
    pub max_relative_error: T,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
    pub checks: Vec<CoordCheck<T>>,
}

impl<T: Scalar> GradCheckReport<T> {
    /// The worst coordinate's entry, if any coordinate was checked.
    pub fn worst_check(&self) -> Option<&CoordCheck<T>> {
        let (name, idx) = self.worst.as_ref()?;
        self.checks.iter().find(|c| &c.param == name && c.index == *idx)
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn relative_error<T: Scalar>(a: T, b: T) -> T {
    let denom = a.abs().max(b.abs()).max(T::lit(1e-8));
    (a - b).abs() / denom
}

/// Compares the gradients written by `analytic` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` of `loss`, one coordinate at a time.
pub fn finite_diff_check<T, L, G>(
    params: &mut ParamSet<T>,
    eps: T,
    mut loss: L,
    analytic: G,
) -> Result<GradCheckReport<T>>
where
    T: Scalar,
    L: FnMut(&ParamSet<T>) -> Result<T>,
    G: FnOnce(&mut ParamSet<T>) -> Result<()>,
{
    params.zero_grads();
    analytic(params)?;
    let grads: Vec<Vec<T>> = params.iter().map(|p| p.grad.as_slice().to_vec()).collect();

    let mut worst = None;
    let mut max_err = T::zero();
    let mut checks = Vec::new();
    let two = T::lit(2.0);
    for (pi, g) in grads.iter().enumerate() {
        for (k, &ga) in g.iter().enumerate() {
            let orig = nth_value(params, pi, k);
            set_nth_value(params, pi, k, orig + eps);
            let up = loss(params)?;
            set_nth_value(params, pi, k, orig - eps);
            let down = loss(params)?;
            set_nth_value(params, pi, k, orig);
            let numeric = (up - down) / (two * eps);
            let err = relative_error(ga, numeric);
            let param = params.iter().nth(pi).unwrap().name.clone();
            if err > max_err || (err.is_nan() && !max_err.is_nan()) {
                max_err = err;
                worst = Some((param.clone(), k));
            }
            checks.push(CoordCheck {
                param,
                index: k,
                analytic: ga,
                numeric,
            });
        }
    }
    Ok(GradCheckReport {
        max_relative_error: max_err,
        worst,
        coordinates: checks.len(),
        checks,
    })
}

/// Gradient check for a loss built on a fresh [`Tape`] by `build`.
pub fn check_tape_gradients<T, B>(params: &mut ParamSet<T>, eps: T, mut build: B) -> Result<GradCheckReport<T>>
where
    T: Scalar,
    B: FnMut(&mut Tape<T>, &ParamSet<T>) -> Result<Var>,
{
    let mut analytic_build = |ps: &mut ParamSet<T>| -> Result<()> {
        let mut tape = Tape::new();
        let l = build(&mut tape, ps)?;
        tape.backward(l, ps)
    };
    params.zero_grads();
    analytic_build(params)?;
    let snapshot: Vec<_> = params.iter().map(|p| p.grad.clone()).collect();
    finite_diff_check(
        params,
        eps,
        |ps| {
            let mut tape = Tape::new();
            let l = build(&mut tape, ps)?;
            Ok(tape.value(l).item())
        },
        |ps| {
            for (p, g) in ps.iter_mut().zip(snapshot) {
                p.grad = g;
            }
            Ok(())
        },
    )
}

fn nth_value<T: Scalar>(params: &ParamSet<T>, pi: usize, k: usize) -> T {
    params.iter().nth(pi).unwrap().value.as_slice()[k]
}

fn set_nth_value<T: Scalar>(params: &mut ParamSet<T>, pi: usize, k: usize, v: T) {
    params.iter_mut().nth(pi).unwrap().value.as_mut_slice()[k] = v;
}
