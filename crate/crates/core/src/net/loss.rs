use super::{NetError, Result, Tensor};
use crate::scalar::Real;

/// Target value excluded from the loss and its gradient.
pub const IGNORE: u16 = u16::MAX;

/// Numerically stable softmax in place.
pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    row.iter_mut().for_each(|v| *v /= s);
}

/// Per-task softmax of `[n, tasks * classes]` logits.
pub fn softmax_tasks<T: Real>(logits: &Tensor<T>, classes: usize) -> Tensor<T> {
    let mut p = logits.clone();
    p.data_mut().chunks_mut(classes).for_each(softmax_in_place);
    p
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    /// Sum over tasks of the mean negative log-likelihood.
    pub total: T,
    pub per_task: Vec<T>,
    pub probs: Tensor<T>,
    pub dlogits: Tensor<T>,
    /// Correct argmax predictions and counted samples per task.
    pub correct: Vec<usize>,
    pub counted: Vec<usize>,
}

/// Multinomial logistic loss. `targets` is `[n, tasks]`; entries equal to
/// [`IGNORE`] are skipped and each task averages over its counted samples.
pub fn softmax_loss<T: Real>(logits: &Tensor<T>, targets: &[u16], classes: usize, tasks: usize) -> Result<LossOutput<T>> {
    let n = logits.batch();
    if logits.stride0() != classes * tasks || targets.len() != n * tasks {
        return Err(NetError::Shape(format!(
            "loss expects [{n}, {}] logits and {} targets, got {:?} and {}",
            classes * tasks,
            n * tasks,
            logits.shape(),
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t != IGNORE && t as usize >= classes) {
        return Err(NetError::TargetOutOfRange { target: t, classes });
    }
    let probs = softmax_tasks(logits, classes);
    let mut counted = vec![0usize; tasks];
    for (j, &t) in targets.iter().enumerate() {
        if t != IGNORE {
            counted[j % tasks] += 1;
        }
    }
    let mut per_task = vec![T::zero(); tasks];
    let mut correct = vec![0usize; tasks];
    let mut dlogits = Tensor::zeros(logits.shape());
    for i in 0..n {
        for t in 0..tasks {
            let target = targets[i * tasks + t];
            if target == IGNORE {
                continue;
            }
            let off = (i * tasks + t) * classes;
            let p = &probs.data()[off..off + classes];
            let inv = T::one() / T::of(counted[t] as f64);
            per_task[t] -= p[target as usize].max(T::min_positive_value()).ln() * inv;
            let g = &mut dlogits.data_mut()[off..off + classes];
            for (c, gc) in g.iter_mut().enumerate() {
                *gc = p[c] * inv;
            }
            g[target as usize] -= inv;
            if argmax(p) == target as usize {
                correct[t] += 1;
            }
        }
    }
    Ok(LossOutput { total: per_task.iter().copied().sum(), per_task, probs, dlogits, correct, counted })
}

/// Index of the largest entry, first on ties.
pub fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
