use rand::Rng;
use serde::{Deserialize, Serialize};

use super::init::{conv_fans, xavier_init};
use super::layers::{Aux, BatchNorm, Conv3d, Dense, Layer, Mode};
use super::loss::softmax_tasks;
use super::{NetError, Result, Tensor};
use crate::scalar::Real;

/// Architecture hyperparameters. [`NetConfig::canonical`] is the production
/// network; smaller settings keep gradient checks and tests fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub patch: usize,
    pub kernels: [usize; 3],
    pub filters: [usize; 3],
    pub fc: [usize; 2],
    pub coord_width: usize,
    pub class_count: usize,
    pub task_count: usize,
    pub dropout: f64,
}

impl NetConfig {
    pub fn canonical(class_count: usize, task_count: usize) -> Self {
        Self {
            patch: 23,
            kernels: [7, 5, 3],
            filters: [32, 64, 64],
            fc: [1024, 512],
            coord_width: 6,
            class_count,
            task_count,
            dropout: 0.5,
        }
    }

    /// Same layer structure at a size that trains in minutes on one core:
    /// 15^3 patches, 8/16/16 filters and 64/32 hidden units, no dropout.
    pub fn compact(class_count: usize, task_count: usize) -> Self {
        Self {
            patch: 15,
            kernels: [5, 3, 3],
            filters: [8, 16, 16],
            fc: [64, 32],
            coord_width: 6,
            class_count,
            task_count,
            dropout: 0.0,
        }
    }

    /// A small network with the same layer structure, for tests and
    /// gradient checks: 11^3 patches, 3^3 kernels and a few units per layer.
    pub fn tiny(class_count: usize, task_count: usize) -> Self {
        Self {
            patch: 11,
            kernels: [3, 3, 3],
            filters: [2, 3, 3],
            fc: [5, 4],
            coord_width: 6,
            class_count,
            task_count,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.class_count < 2 {
            errs.push(format!("class_count {} must be at least 2", self.class_count));
        }
        if ![1, 7, 27].contains(&self.task_count) {
            errs.push(format!("task_count {} must be 1, 7 or 27", self.task_count));
        }
        if self.kernels.iter().any(|k| k % 2 == 0) {
            errs.push(format!("kernels {:?} must be odd", self.kernels));
        }
        if self.filters.iter().chain(&self.fc).any(|&f| f == 0) {
            errs.push("filter and neuron counts must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            errs.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.patch % 2 == 0 {
            errs.push(format!("patch {} must be odd", self.patch));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(NetError::Config(errs.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedLayer<T> {
    pub name: String,
    pub layer: Layer<T>,
}

/// Ordered layer stack from patch to per-task logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<NamedLayer<T>>,
    patch: usize,
    class_count: usize,
    task_count: usize,
    coord_width: usize,
}

/// One row of the parameter census (conv and dense layers only, biases
/// excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CensusRow {
    pub name: String,
    pub calculation: String,
    pub params: usize,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

/// Activations saved by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    start: usize,
    inputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
    pub logits: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct Gradients<T> {
    /// Aligned with [`Network::params`].
    pub params: Vec<Tensor<T>>,
    pub input: Option<Tensor<T>>,
    pub coords: Option<Vec<T>>,
}

fn conv<T: Real, R: Rng + ?Sized>(k: usize, cin: usize, cout: usize, extent: usize, bias: bool, rng: &mut R) -> Layer<T> {
    let (fi, fo) = conv_fans(cin, cout, k);
    Layer::Conv3d(Conv3d {
        kernel: k,
        in_extent: extent,
        weight: xavier_init(&[cout, cin, k, k, k], fi, fo, rng),
        bias: bias.then(|| Tensor::zeros(&[cout])),
    })
}

fn dense<T: Real, R: Rng + ?Sized>(input: usize, out: usize, tasks: usize, bias: bool, rng: &mut R) -> Layer<T> {
    Layer::Dense(Dense {
        tasks,
        weight: xavier_init(&[tasks * out, input], input, out, rng),
        bias: bias.then(|| Tensor::zeros(&[tasks * out])),
    })
}

fn batchnorm<T: Real>(c: usize) -> Layer<T> {
    Layer::BatchNorm(BatchNorm {
        eps: 1e-5,
        momentum: 0.9,
        gamma: Tensor::filled(&[c], T::one()),
        beta: Tensor::zeros(&[c]),
        running_mean: Tensor::zeros(&[c]),
        running_var: Tensor::filled(&[c], T::one()),
    })
}

/// The production network for `class_count` classes and `task_count`
/// replicated heads.
pub fn build_canonical<T: Real, R: Rng + ?Sized>(class_count: usize, task_count: usize, rng: &mut R) -> Result<Network<T>> {
    Network::build(&NetConfig::canonical(class_count, task_count), rng)
}

impl<T: Real> Network<T> {
    /// Layer stack: conv-relu-pool, conv-bn-relu, conv-bn-relu, dense-relu-
    /// dropout, concat, dense-bn-relu-dropout, replicated dense heads. Layers
    /// followed by batch norm carry no bias.
    pub fn build<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let [k1, k2, k3] = cfg.kernels;
        let [f1, f2, f3] = cfg.filters;
        let e1 = cfg.patch;
        let c1 = e1.checked_sub(k1 - 1).filter(|&e| e > 0).ok_or_else(|| too_small(cfg))?;
        let e2 = super::layers::pool_extent(c1, 2, 2);
        let c2 = e2.checked_sub(k2 - 1).filter(|&e| e > 0).ok_or_else(|| too_small(cfg))?;
        let c3 = c2.checked_sub(k3 - 1).filter(|&e| e > 0).ok_or_else(|| too_small(cfg))?;
        let flat = f3 * c3.pow(3);
        let [h1, h2] = cfg.fc;
        let spec: Vec<(&str, Layer<T>)> = vec![
            ("conv1", conv(k1, 1, f1, e1, true, rng)),
            ("relu1", Layer::Relu),
            ("pool1", Layer::MaxPool3d { size: 2, stride: 2 }),
            ("conv2", conv(k2, f1, f2, e2, false, rng)),
            ("bn2", batchnorm(f2)),
            ("relu2", Layer::Relu),
            ("conv3", conv(k3, f2, f3, c2, false, rng)),
            ("bn3", batchnorm(f3)),
            ("relu3", Layer::Relu),
            ("fc1", dense(flat, h1, 1, true, rng)),
            ("relu4", Layer::Relu),
            ("drop1", Layer::Dropout { rate: cfg.dropout }),
            ("concat", Layer::Concat { width: cfg.coord_width }),
            ("fc2", dense(h1 + cfg.coord_width, h2, 1, false, rng)),
            ("bn4", batchnorm(h2)),
            ("relu5", Layer::Relu),
            ("drop2", Layer::Dropout { rate: cfg.dropout }),
            ("heads", dense(h2, cfg.class_count, cfg.task_count, true, rng)),
            ("softmax", Layer::Softmax { classes: cfg.class_count, tasks: cfg.task_count }),
            ("loss", Layer::Loss { tasks: cfg.task_count }),
        ];
        Self::from_layers(spec.into_iter().map(|(n, l)| NamedLayer { name: n.into(), layer: l }).collect())
    }

    /// Validates a layer list: a leading conv fixes the patch extent, shapes
    /// must chain, and the stack ends in the softmax and loss markers.
    pub fn from_layers(layers: Vec<NamedLayer<T>>) -> Result<Self> {
        let patch = match layers.first().map(|l| &l.layer) {
            Some(Layer::Conv3d(c)) => c.in_extent,
            _ => return Err(NetError::Format("network must start with a conv layer".into())),
        };
        let n = layers.len();
        let (class_count, task_count) = match (layers.get(n.wrapping_sub(2)).map(|l| &l.layer), layers.last().map(|l| &l.layer)) {
            (Some(Layer::Softmax { classes, tasks }), Some(Layer::Loss { tasks: lt })) if tasks == lt => (*classes, *tasks),
            _ => return Err(NetError::Format("network must end with softmax and loss markers".into())),
        };
        let coord_width = layers
            .iter()
            .find_map(|l| match l.layer {
                Layer::Concat { width } => Some(width),
                _ => None,
            })
            .unwrap_or(0);
        let in_ch = match &layers[0].layer {
            Layer::Conv3d(c) => c.in_channels(),
            _ => unreachable!(),
        };
        let net = Self { layers, patch, class_count, task_count, coord_width };
        let mut shape = vec![in_ch, patch, patch, patch];
        for l in &net.layers {
            if let Layer::Conv3d(c) = &l.layer {
                if shape.len() == 4 && shape[1] != c.in_extent {
                    return Err(NetError::Shape(format!("{}: built for extent {}, receives {:?}", l.name, c.in_extent, shape)));
                }
            }
            shape = l.layer.out_shape(&shape).map_err(|e| NetError::Shape(format!("{}: {e}", l.name)))?;
        }
        if shape != [class_count * task_count] {
            return Err(NetError::Shape(format!("network output {shape:?} does not match {task_count} heads of {class_count} classes")));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[NamedLayer<T>] {
        &self.layers
    }

    pub fn patch_size(&self) -> usize {
        self.patch
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn task_count(&self) -> usize {
        self.task_count
    }

    pub fn coord_width(&self) -> usize {
        self.coord_width
    }

    /// Output shape of every layer for a single sample.
    pub fn shape_chain(&self) -> Vec<(String, Vec<usize>)> {
        let mut shape = vec![1, self.patch, self.patch, self.patch];
        self.layers
            .iter()
            .map(|l| {
                shape = l.layer.out_shape(&shape).expect("validated at construction");
                (l.name.clone(), shape.clone())
            })
            .collect()
    }

    pub fn census(&self) -> Vec<CensusRow> {
        let mut shape = vec![1, self.patch, self.patch, self.patch];
        let mut rows = Vec::new();
        for l in &self.layers {
            let out = l.layer.out_shape(&shape).expect("validated at construction");
            let calc = match &l.layer {
                Layer::Conv3d(c) => {
                    let k = c.kernel;
                    Some(format!("{k} x {k} x {k} x {} x {}", c.in_channels(), c.out_channels()))
                }
                Layer::Dense(d) if d.tasks > 1 => Some(format!("{} x ({} x {})", d.tasks, d.in_width(), d.out_per_task())),
                Layer::Dense(d) => Some(format!("{} x {}", d.in_width(), d.rows())),
                _ => None,
            };
            if let Some(calculation) = calc {
                rows.push(CensusRow {
                    name: l.name.clone(),
                    calculation,
                    params: l.layer.learnable()[0].len(),
                    input: shape.clone(),
                    output: out.clone(),
                });
            }
            shape = out;
        }
        rows
    }

    /// Total non-bias conv and dense weights.
    pub fn census_total(&self) -> usize {
        self.census().iter().map(|r| r.params).sum()
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.layer.learnable()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.layer.learnable_mut()).collect()
    }

    /// Names aligned with [`Network::params`], such as `conv1.weight`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in &self.layers {
            let parts: &[&str] = match &l.layer {
                Layer::BatchNorm(_) => &["gamma", "beta"],
                _ => &["weight", "bias"],
            };
            for part in parts.iter().take(l.layer.learnable().len()) {
                names.push(format!("{}.{part}", l.name));
            }
        }
        names
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// Copy with every dropout rate set to zero.
    pub fn without_dropout(&self) -> Self {
        let mut n = self.clone();
        for l in &mut n.layers {
            if let Layer::Dropout { rate } = &mut l.layer {
                *rate = 0.0;
            }
        }
        n
    }

    /// Converts the scalar type, rounding to nearest.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let c = |t: &Tensor<T>| t.cast::<U>();
        let layers = self
            .layers
            .iter()
            .map(|l| NamedLayer {
                name: l.name.clone(),
                layer: match &l.layer {
                    Layer::Conv3d(v) => Layer::Conv3d(Conv3d {
                        kernel: v.kernel,
                        in_extent: v.in_extent,
                        weight: c(&v.weight),
                        bias: v.bias.as_ref().map(c),
                    }),
                    Layer::Dense(v) => Layer::Dense(Dense { tasks: v.tasks, weight: c(&v.weight), bias: v.bias.as_ref().map(c) }),
                    Layer::BatchNorm(v) => Layer::BatchNorm(BatchNorm {
                        eps: v.eps,
                        momentum: v.momentum,
                        gamma: c(&v.gamma),
                        beta: c(&v.beta),
                        running_mean: c(&v.running_mean),
                        running_var: c(&v.running_var),
                    }),
                    Layer::Relu => Layer::Relu,
                    Layer::MaxPool3d { size, stride } => Layer::MaxPool3d { size: *size, stride: *stride },
                    Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
                    Layer::Concat { width } => Layer::Concat { width: *width },
                    Layer::Softmax { classes, tasks } => Layer::Softmax { classes: *classes, tasks: *tasks },
                    Layer::Loss { tasks } => Layer::Loss { tasks: *tasks },
                },
            })
            .collect();
        Network { layers, patch: self.patch, class_count: self.class_count, task_count: self.task_count, coord_width: self.coord_width }
    }

    fn logits_end(&self) -> usize {
        self.layers.len() - 2
    }

    fn check_input(&self, x: &Tensor<T>, coords: &[T]) -> Result<()> {
        let p = self.patch;
        let want = [x.shape().first().copied().unwrap_or(0), 1, p, p, p];
        if x.shape() != want {
            return Err(NetError::Shape(format!("expected input [n, 1, {p}, {p}, {p}], got {:?}", x.shape())));
        }
        if coords.len() != x.batch() * self.coord_width {
            return Err(NetError::Shape(format!("expected {} coordinate values, got {}", x.batch() * self.coord_width, coords.len())));
        }
        Ok(())
    }

    /// Per-task logits `[n, tasks * classes]`.
    pub fn forward(&self, x: &Tensor<T>, coords: &[T], mode: &mut Mode) -> Result<Tensor<T>> {
        self.check_input(x, coords)?;
        self.forward_from(0, x.clone(), coords, mode)
    }

    /// Runs layers `start..` on an intermediate activation.
    pub fn forward_from(&self, start: usize, x: Tensor<T>, coords: &[T], mode: &mut Mode) -> Result<Tensor<T>> {
        let mut x = x;
        for l in &self.layers[start..self.logits_end()] {
            x = l.layer.forward(&x, coords, mode)?.0;
        }
        Ok(x)
    }

    /// Per-task class distributions in infer mode.
    pub fn predict(&self, x: &Tensor<T>, coords: &[T]) -> Result<Tensor<T>> {
        let logits = self.forward(x, coords, &mut Mode::infer())?;
        Ok(softmax_tasks(&logits, self.class_count))
    }

    pub fn forward_trace(&self, x: &Tensor<T>, coords: &[T], mode: &mut Mode) -> Result<Trace<T>> {
        self.check_input(x, coords)?;
        let end = self.logits_end();
        let mut inputs = Vec::with_capacity(end);
        let mut aux = Vec::with_capacity(end);
        let mut cur = x.clone();
        for l in &self.layers[..end] {
            let (y, a) = l.layer.forward(&cur, coords, mode)?;
            inputs.push(std::mem::replace(&mut cur, y));
            aux.push(a);
        }
        Ok(Trace { start: 0, inputs, aux, logits: cur })
    }

    /// Gradients of a scalar loss given `dlogits`, its gradient at the logits.
    pub fn backward(&self, trace: &Trace<T>, dlogits: Tensor<T>, need_input_grad: bool) -> Result<Gradients<T>> {
        if dlogits.shape() != trace.logits.shape() {
            return Err(NetError::Shape(format!("dlogits {:?} vs logits {:?}", dlogits.shape(), trace.logits.shape())));
        }
        let mut grads = self.zero_grads();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.layer.learnable().len();
        }
        let mut dy = dlogits;
        let mut dcoords = None;
        let end = self.logits_end();
        for i in (trace.start..end).rev() {
            let layer = &self.layers[i].layer;
            let np = layer.learnable().len();
            let need_dx = i > trace.start || need_input_grad;
            let g = layer.backward(&trace.inputs[i - trace.start], &trace.aux[i - trace.start], dy, &mut grads[offsets[i]..offsets[i] + np], need_dx);
            if g.dcoords.is_some() {
                dcoords = g.dcoords;
            }
            match g.dx {
                Some(dx) => dy = dx,
                None => {
                    return Ok(Gradients { params: grads, input: None, coords: dcoords });
                }
            }
        }
        Ok(Gradients { params: grads, input: need_input_grad.then_some(dy), coords: dcoords })
    }

    /// Folds the batch statistics of a training trace into the moving
    /// batch-norm averages.
    pub fn commit_batch_stats(&mut self, trace: &Trace<T>) {
        for (i, aux) in trace.aux.iter().enumerate() {
            if let (Aux::Bn { mean, var, .. }, Layer::BatchNorm(bn)) = (aux, &mut self.layers[i + trace.start].layer) {
                let x = &trace.inputs[i];
                let count = x.batch() * x.shape()[2..].iter().product::<usize>();
                bn.update_running(mean, var, count);
            }
        }
    }
}

fn too_small(cfg: &NetConfig) -> NetError {
    NetError::Config(format!("patch {} too small for kernels {:?}", cfg.patch, cfg.kernels))
}
