//! Central finite-difference checks of the analytic gradients, in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layers::{Layer, Mode};
use super::loss::softmax_loss;
use super::network::Network;
use super::{Result, Tensor};

/// Denominator floor of the relative error: entries whose analytic and
/// numeric values are both below it are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

struct Acc {
    name: String,
    checked: usize,
    worst: f64,
}

impl Acc {
    fn new(name: String) -> Self {
        Self { name, checked: 0, worst: 0.0 }
    }

    fn add(&mut self, a: f64, n: f64) {
        self.checked += 1;
        self.worst = self.worst.max(rel_err(a, n));
    }

    fn done(self) -> GradCheckEntry {
        GradCheckEntry { name: self.name, checked: self.checked, max_rel_err: self.worst }
    }
}

/// Checks every parameter, input and coordinate gradient of the network's
/// total loss. Dropout must already be disabled; batch norm runs in train
/// mode on the fixed batch.
pub fn check_network(net: &Network<f64>, x: &Tensor<f64>, coords: &[f64], targets: &[u16], h: f64) -> Result<GradCheckReport> {
    let (classes, tasks) = (net.class_count(), net.task_count());
    let loss = |n: &Network<f64>, x: &Tensor<f64>, c: &[f64]| -> Result<f64> {
        let logits = n.forward(x, c, &mut Mode::train(0))?;
        Ok(softmax_loss(&logits, targets, classes, tasks)?.total)
    };
    let trace = net.forward_trace(x, coords, &mut Mode::train(0))?;
    let out = softmax_loss(&trace.logits, targets, classes, tasks)?;
    let g = net.backward(&trace, out.dlogits, true)?;

    let mut report = GradCheckReport::default();
    let mut work = net.clone();
    let mut pi = 0;
    for l in net.layers() {
        for (k, p) in l.layer.learnable().into_iter().enumerate() {
            let mut acc = Acc::new(format!("{}.param{k}", l.name));
            for j in 0..p.len() {
                let orig = p.data()[j];
                work.params_mut()[pi].data_mut()[j] = orig + h;
                let up = loss(&work, x, coords)?;
                work.params_mut()[pi].data_mut()[j] = orig - h;
                let dn = loss(&work, x, coords)?;
                work.params_mut()[pi].data_mut()[j] = orig;
                acc.add(g.params[pi].data()[j], (up - dn) / (2.0 * h));
            }
            report.entries.push(acc.done());
            pi += 1;
        }
    }
    let gi = g.input.expect("input gradient requested");
    let mut acc = Acc::new("input".into());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let orig = x.data()[j];
        xp.data_mut()[j] = orig + h;
        let up = loss(net, &xp, coords)?;
        xp.data_mut()[j] = orig - h;
        let dn = loss(net, &xp, coords)?;
        xp.data_mut()[j] = orig;
        acc.add(gi.data()[j], (up - dn) / (2.0 * h));
    }
    report.entries.push(acc.done());
    if let Some(gc) = g.coords {
        let mut acc = Acc::new("coords".into());
        let mut cp = coords.to_vec();
        for j in 0..coords.len() {
            cp[j] = coords[j] + h;
            let up = loss(net, x, &cp)?;
            cp[j] = coords[j] - h;
            let dn = loss(net, x, &cp)?;
            cp[j] = coords[j];
            acc.add(gc[j], (up - dn) / (2.0 * h));
        }
        report.entries.push(acc.done());
    }
    Ok(report)
}

/// Checks one layer against the objective `sum(r * layer(x))` for a fixed
/// random `r`.
pub fn check_layer(name: &str, layer: &Layer<f64>, x: &Tensor<f64>, coords: &[f64], h: f64, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y0, aux) = layer.forward(x, coords, &mut Mode::train(0))?;
    let r: Vec<f64> = (0..y0.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |l: &Layer<f64>, x: &Tensor<f64>, c: &[f64]| -> Result<f64> {
        let (y, _) = l.forward(x, c, &mut Mode::train(0))?;
        Ok(y.data().iter().zip(&r).map(|(a, b)| a * b).sum())
    };
    let mut grads: Vec<Tensor<f64>> = layer.learnable().iter().map(|p| Tensor::zeros(p.shape())).collect();
    let g = layer.backward(x, &aux, Tensor::from_vec(y0.shape(), r.clone()), &mut grads, true);

    let mut report = GradCheckReport::default();
    let mut work = layer.clone();
    for (k, p) in layer.learnable().into_iter().enumerate() {
        let mut acc = Acc::new(format!("{name}.param{k}"));
        for j in 0..p.len() {
            let orig = p.data()[j];
            work.learnable_mut()[k].data_mut()[j] = orig + h;
            let up = objective(&work, x, coords)?;
            work.learnable_mut()[k].data_mut()[j] = orig - h;
            let dn = objective(&work, x, coords)?;
            work.learnable_mut()[k].data_mut()[j] = orig;
            acc.add(grads[k].data()[j], (up - dn) / (2.0 * h));
        }
        report.entries.push(acc.done());
    }
    if let Some(gx) = g.dx {
        let mut acc = Acc::new(format!("{name}.input"));
        let mut xp = x.clone();
        for j in 0..x.len() {
            let orig = x.data()[j];
            xp.data_mut()[j] = orig + h;
            let up = objective(layer, &xp, coords)?;
            xp.data_mut()[j] = orig - h;
            let dn = objective(layer, &xp, coords)?;
            xp.data_mut()[j] = orig;
            acc.add(gx.data()[j], (up - dn) / (2.0 * h));
        }
        report.entries.push(acc.done());
    }
    if let Some(gc) = g.dcoords {
        let mut acc = Acc::new(format!("{name}.coords"));
        let mut cp = coords.to_vec();
        for j in 0..coords.len() {
            cp[j] = coords[j] + h;
            let up = objective(layer, x, &cp)?;
            cp[j] = coords[j] - h;
            let dn = objective(layer, x, &cp)?;
            cp[j] = coords[j];
            acc.add(gc[j], (up - dn) / (2.0 * h));
        }
        report.entries.push(acc.done());
    }
    Ok(report)
}
