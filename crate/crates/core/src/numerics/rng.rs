//! Seeded randomness. All stochastic choices in the crate draw from
//! xoshiro256++ seeded through SplitMix64 (`seed_from_u64`), so a seed fully
//! determines initialisation and training order on every platform.

use rand::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::scalar::Scalar;

use super::Matrix;

pub type Rng = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Uniform in `[-bound, bound)`, drawn in 64-bit and rounded to `T`.
pub fn uniform<T: Scalar>(rng: &mut Rng, bound: f64) -> T {
    T::lit(rng.random_range(-bound..bound))
}

/// Uniform(−√(1/fan_in), +√(1/fan_in)) with `fan_in = cols`.
pub fn fan_in_uniform<T: Scalar>(rng: &mut Rng, rows: usize, cols: usize) -> Matrix<T> {
    let bound = (1.0 / cols.max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| uniform(rng, bound)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape by construction")
}
