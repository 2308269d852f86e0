use super::{Result, TrainError};
use crate::net::{Network, Tensor};
use crate::scalar::Real;

/// `base_lr * (1 - iter / max_iter)^power`.
pub fn poly_lr(iter: usize, max_iter: usize, base_lr: f64, power: f64) -> Result<f64> {
    if iter > max_iter || max_iter == 0 {
        return Err(TrainError::IterOutOfRange { iter, max_iter });
    }
    Ok(base_lr * (1.0 - iter as f64 / max_iter as f64).powf(power))
}

/// Momentum step on a network's parameters; see [`sgd_update`].
pub fn sgd_step<T: Real>(net: &mut Network<T>, grads: &[Tensor<T>], velocity: &mut [Tensor<T>], lr: f64, momentum: f64) -> Result<()> {
    let names = net.param_names();
    update(&mut net.params_mut(), grads, velocity, lr, momentum, Some(&names))
}

/// One momentum step: `v <- momentum * v - lr * g`, then `theta <- theta + v`.
///
/// Nothing is modified when a shape differs or a gradient entry is not
/// finite.
pub fn sgd_update<T: Real>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], velocity: &mut [Tensor<T>], lr: f64, momentum: f64) -> Result<()> {
    update(params, grads, velocity, lr, momentum, None)
}

fn update<T: Real>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], velocity: &mut [Tensor<T>], lr: f64, momentum: f64, names: Option<&[String]>) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(TrainError::Shape(format!("{} parameters, {} gradients, {} velocities", params.len(), grads.len(), velocity.len())));
    }
    for (i, ((p, g), v)) in params.iter().zip(grads).zip(velocity.iter()).enumerate() {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(TrainError::Shape(format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape())));
        }
        if let Some(j) = g.data().iter().position(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { param: names.and_then(|n| n.get(i).cloned()).unwrap_or_else(|| format!("parameter {i}")), index: j, value: g.data()[j].as_f64() });
        }
    }
    let (lr, m) = (T::of(lr), T::of(momentum));
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vv = m * *vv - lr * gv;
            *pv += *vv;
        }
    }
    Ok(())
}
