use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::Tensor;
use crate::scalar::Real;

/// Glorot/Xavier uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// I.i.d. uniform on `[-a, a]` with the Xavier bound.
pub fn xavier_init<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let a = xavier_bound(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-a, a);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::of(dist.sample(rng))).collect())
}

/// Fan-in and fan-out of a conv kernel `[out, in, k, k, k]`: the kernel
/// volume multiplies both channel counts.
pub fn conv_fans(in_ch: usize, out_ch: usize, k: usize) -> (usize, usize) {
    (in_ch * k.pow(3), out_ch * k.pow(3))
}
