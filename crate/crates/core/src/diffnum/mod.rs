//! Minimal reverse-mode differentiation: tensors, a single-use tape, Adam,
//! and a finite-difference checker.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{concat, log_sum_exp, sigmoid, softmax, stack, sum_all, GradBuf, Tape, Var, COSINE_EPS, LEAKY_SLOPE};
pub use tensor::Tensor;

use rand::Rng as _;

use crate::rng::Rng;

/// Uniform(-scale, scale) initialization.
pub fn uniform(shape: &[usize], scale: f64, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..scale))
}

#[cfg(test)]
mod tests;
