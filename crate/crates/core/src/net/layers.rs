use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{NetError, Result, Tensor};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// Forward-pass mode. The rng is only consulted by dropout in train phase.
#[derive(Debug, Clone)]
pub struct Mode {
    phase: Phase,
    rng: Option<ChaCha8Rng>,
}

impl Mode {
    pub fn train(seed: u64) -> Self {
        use rand::SeedableRng;
        Self { phase: Phase::Train, rng: Some(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn infer() -> Self {
        Self { phase: Phase::Infer, rng: None }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_train(&self) -> bool {
        self.phase == Phase::Train
    }
}

/// Valid 3D cross-correlation. Weights are `[out, in, kz, ky, kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d<T> {
    pub kernel: usize,
    /// Cubic spatial input extent the layer was built for.
    pub in_extent: usize,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub eps: f64,
    pub momentum: f64,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

/// Affine map; `tasks > 1` marks a replicated head whose rows are grouped by
/// task (`tasks * out` rows in total).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub tasks: usize,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv3d(Conv3d<T>),
    Relu,
    MaxPool3d { size: usize, stride: usize },
    BatchNorm(BatchNorm<T>),
    Dropout { rate: f64 },
    Dense(Dense<T>),
    /// Appends the per-sample coordinate vector.
    Concat { width: usize },
    /// Marker: per-task softmax over `classes`.
    Softmax { classes: usize, tasks: usize },
    /// Marker: multinomial logistic loss summed over tasks.
    Loss { tasks: usize },
}

/// Per-layer state saved by a training forward pass.
#[derive(Debug, Clone)]
pub enum Aux<T> {
    None,
    Pool(Vec<u32>),
    Bn { xhat: Vec<T>, inv_std: Vec<T>, mean: Vec<T>, var: Vec<T> },
    Dropout(Vec<T>),
}

pub(crate) struct LayerGrad<T> {
    pub dx: Option<Tensor<T>>,
    pub dcoords: Option<Vec<T>>,
}

impl<T: Real> Conv3d<T> {
    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    fn rows(&self) -> usize {
        self.in_channels() * self.kernel.pow(3)
    }
}

/// Unfolds each `k^3` window of a `[c, d, h, w]` sample into a column.
/// Result is `[c*k^3, od*oh*ow]` with rows ordered `(c, kz, ky, kx)`.
pub(crate) fn im2col<T: Real>(x: &[T], c: usize, dims: [usize; 3], k: usize, cols: &mut Vec<T>) {
    let [d, h, w] = dims;
    let (od, oh, ow) = (d + 1 - k, h + 1 - k, w + 1 - k);
    let p = od * oh * ow;
    cols.clear();
    cols.resize(c * k * k * k * p, T::zero());
    let mut row = 0;
    for ci in 0..c {
        let plane = &x[ci * d * h * w..(ci + 1) * d * h * w];
        for kz in 0..k {
            for ky in 0..k {
                for kx in 0..k {
                    let dst = &mut cols[row * p..(row + 1) * p];
                    let mut o = 0;
                    for oz in 0..od {
                        for oy in 0..oh {
                            let src = (oz + kz) * h * w + (oy + ky) * w + kx;
                            dst[o..o + ow].copy_from_slice(&plane[src..src + ow]);
                            o += ow;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col`], accumulating into `dx`.
fn col2im<T: Real>(cols: &[T], c: usize, dims: [usize; 3], k: usize, dx: &mut [T]) {
    let [d, h, w] = dims;
    let (od, oh, ow) = (d + 1 - k, h + 1 - k, w + 1 - k);
    let p = od * oh * ow;
    let mut row = 0;
    for ci in 0..c {
        let plane = &mut dx[ci * d * h * w..(ci + 1) * d * h * w];
        for kz in 0..k {
            for ky in 0..k {
                for kx in 0..k {
                    let src = &cols[row * p..(row + 1) * p];
                    let mut o = 0;
                    for oz in 0..od {
                        for oy in 0..oh {
                            let dst = (oz + kz) * h * w + (oy + ky) * w + kx;
                            for (a, b) in plane[dst..dst + ow].iter_mut().zip(&src[o..o + ow]) {
                                *a += *b;
                            }
                            o += ow;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn spatial(x: &Tensor<impl Real>) -> Result<[usize; 3]> {
    if x.rank() != 5 {
        return Err(NetError::Shape(format!("expected a 5-axis tensor, got {:?}", x.shape())));
    }
    let s = x.shape();
    Ok([s[2], s[3], s[4]])
}

impl<T: Real> Conv3d<T> {
    /// Convolves one `[c, d, h, w]` sample into `out` (`[cout, od, oh, ow]`).
    pub(crate) fn forward_sample(&self, x: &[T], dims: [usize; 3], out: &mut [T], cols: &mut Vec<T>) {
        let k = self.kernel;
        im2col(x, self.in_channels(), dims, k, cols);
        let p = (dims[0] + 1 - k) * (dims[1] + 1 - k) * (dims[2] + 1 - k);
        let cout = self.out_channels();
        match &self.bias {
            Some(b) => {
                for (co, chunk) in out.chunks_mut(p).enumerate() {
                    chunk.iter_mut().for_each(|v| *v = b.data()[co]);
                }
            }
            None => out.iter_mut().for_each(|v| *v = T::zero()),
        }
        let kk = self.rows();
        T::gemm(
            cout, kk, p, T::one(), self.weight.data(), kk as isize, 1, cols, p as isize, 1, T::one(), out,
            p as isize, 1,
        );
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let dims = spatial(x)?;
        let k = self.kernel;
        if x.shape()[1] != self.in_channels() {
            return Err(NetError::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_channels(),
                x.shape()[1]
            )));
        }
        if dims.iter().any(|&e| e < k) {
            return Err(NetError::Shape(format!("conv kernel {k} exceeds input extent {dims:?}")));
        }
        let n = x.batch();
        let od = [dims[0] + 1 - k, dims[1] + 1 - k, dims[2] + 1 - k];
        let mut y = Tensor::zeros(&[n, self.out_channels(), od[0], od[1], od[2]]);
        let ys = y.stride0();
        let mut cols = Vec::new();
        for i in 0..n {
            let out = &mut y.data_mut()[i * ys..(i + 1) * ys];
            self.forward_sample(x.sample(i), dims, out, &mut cols);
        }
        Ok(y)
    }

    fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grads: &mut [Tensor<T>], need_dx: bool) -> Option<Tensor<T>> {
        let dims = [x.shape()[2], x.shape()[3], x.shape()[4]];
        let k = self.kernel;
        let cin = self.in_channels();
        let cout = self.out_channels();
        let kk = self.rows();
        let p = dy.stride0() / cout;
        let mut cols = Vec::new();
        let mut dcols = vec![T::zero(); kk * p];
        let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
        let (gw, gb) = grads.split_at_mut(1);
        for i in 0..x.batch() {
            let g = dy.sample(i);
            im2col(x.sample(i), cin, dims, k, &mut cols);
            T::gemm(
                cout, p, kk, T::one(), g, p as isize, 1, &cols, 1, p as isize, T::one(), gw[0].data_mut(),
                kk as isize, 1,
            );
            if let Some(db) = gb.first_mut() {
                for (co, chunk) in g.chunks(p).enumerate() {
                    db.data_mut()[co] += chunk.iter().copied().sum::<T>();
                }
            }
            if let Some(dx) = dx.as_mut() {
                T::gemm(
                    kk, cout, p, T::one(), self.weight.data(), 1, kk as isize, g, p as isize, 1, T::zero(),
                    &mut dcols, p as isize, 1,
                );
                let s = dx.stride0();
                col2im(&dcols, cin, dims, k, &mut dx.data_mut()[i * s..(i + 1) * s]);
            }
        }
        dx
    }
}

/// Ceil-mode output extent of a pooling window.
pub fn pool_extent(input: usize, size: usize, stride: usize) -> usize {
    if input <= size {
        1
    } else {
        (input - size).div_ceil(stride) + 1
    }
}

fn maxpool_forward<T: Real>(x: &Tensor<T>, size: usize, stride: usize) -> Result<(Tensor<T>, Vec<u32>)> {
    let [d, h, w] = spatial(x)?;
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let (od, oh, ow) = (pool_extent(d, size, stride), pool_extent(h, size, stride), pool_extent(w, size, stride));
    let mut y = Tensor::zeros(&[n, c, od, oh, ow]);
    let mut arg = Vec::with_capacity(y.len());
    let xs = x.data();
    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * d * h * w;
        for oz in 0..od {
            let z0 = oz * stride;
            for oy in 0..oh {
                let y0 = oy * stride;
                for ox in 0..ow {
                    let x0 = ox * stride;
                    let mut best = base + z0 * h * w + y0 * w + x0;
                    for z in z0..(z0 + size).min(d) {
                        for yy in y0..(y0 + size).min(h) {
                            for xx in x0..(x0 + size).min(w) {
                                let idx = base + z * h * w + yy * w + xx;
                                if xs[idx] > xs[best] {
                                    best = idx;
                                }
                            }
                        }
                    }
                    y.data_mut()[o] = xs[best];
                    arg.push(best as u32);
                    o += 1;
                }
            }
        }
    }
    Ok((y, arg))
}

/// Views a tensor as `[n, c, s]`: per-channel statistics for spatial inputs,
/// per-feature for flat inputs.
fn bn_view(x: &Tensor<impl Real>) -> (usize, usize, usize) {
    let s = x.shape();
    let spatial: usize = s[2..].iter().product();
    (s[0], s[1], spatial)
}

impl<T: Real> BatchNorm<T> {
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn forward(&self, x: &Tensor<T>, train: bool) -> Result<(Tensor<T>, Aux<T>)> {
        let (n, c, s) = bn_view(x);
        if c != self.channels() {
            return Err(NetError::Shape(format!("batchnorm expects {} channels, got {c}", self.channels())));
        }
        let eps = T::of(self.eps);
        let mut y = Tensor::zeros(x.shape());
        let (g, b) = (self.gamma.data(), self.beta.data());
        if !train {
            for i in 0..n {
                for ch in 0..c {
                    let inv = T::one() / (self.running_var.data()[ch] + eps).sqrt();
                    let mu = self.running_mean.data()[ch];
                    let off = (i * c + ch) * s;
                    for j in off..off + s {
                        y.data_mut()[j] = g[ch] * (x.data()[j] - mu) * inv + b[ch];
                    }
                }
            }
            return Ok((y, Aux::None));
        }
        if n < 2 {
            return Err(NetError::BatchTooSmall(n));
        }
        let m = T::of((n * s) as f64);
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * s;
                mean[ch] += x.data()[off..off + s].iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * s;
                var[ch] += x.data()[off..off + s].iter().map(|&v| (v - mean[ch]) * (v - mean[ch])).sum::<T>();
            }
        }
        var.iter_mut().for_each(|v| *v /= m);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![T::zero(); x.len()];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * s;
                for j in off..off + s {
                    let h = (x.data()[j] - mean[ch]) * inv_std[ch];
                    xhat[j] = h;
                    y.data_mut()[j] = g[ch] * h + b[ch];
                }
            }
        }
        Ok((y, Aux::Bn { xhat, inv_std, mean, var }))
    }

    fn backward(&self, x: &Tensor<T>, aux: &Aux<T>, dy: &Tensor<T>, grads: &mut [Tensor<T>]) -> Tensor<T> {
        let (n, c, s) = bn_view(x);
        let g = self.gamma.data();
        let mut dx = Tensor::zeros(x.shape());
        let Aux::Bn { xhat, inv_std, .. } = aux else {
            // Inference-mode statistics are constants.
            for i in 0..n {
                for ch in 0..c {
                    let inv = T::one() / (self.running_var.data()[ch] + T::of(self.eps)).sqrt();
                    let mu = self.running_mean.data()[ch];
                    let off = (i * c + ch) * s;
                    for j in off..off + s {
                        let d = dy.data()[j];
                        grads[0].data_mut()[ch] += d * (x.data()[j] - mu) * inv;
                        grads[1].data_mut()[ch] += d;
                        dx.data_mut()[j] = d * g[ch] * inv;
                    }
                }
            }
            return dx;
        };
        let m = T::of((n * s) as f64);
        let mut sum_d = vec![T::zero(); c];
        let mut sum_dh = vec![T::zero(); c];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * s;
                for j in off..off + s {
                    let d = dy.data()[j];
                    sum_d[ch] += d;
                    sum_dh[ch] += d * xhat[j];
                }
            }
        }
        for ch in 0..c {
            grads[0].data_mut()[ch] += sum_dh[ch];
            grads[1].data_mut()[ch] += sum_d[ch];
        }
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * s;
                let k = g[ch] * inv_std[ch] / m;
                for j in off..off + s {
                    dx.data_mut()[j] = k * (m * dy.data()[j] - sum_d[ch] - xhat[j] * sum_dh[ch]);
                }
            }
        }
        dx
    }

    /// Folds batch statistics into the moving averages. The moving variance
    /// uses the unbiased batch estimate.
    pub(crate) fn update_running(&mut self, mean: &[T], var: &[T], count: usize) {
        let mo = T::of(self.momentum);
        let unbias = if count > 1 { T::of(count as f64 / (count as f64 - 1.0)) } else { T::one() };
        for ch in 0..self.channels() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = mo * *rm + (T::one() - mo) * mean[ch];
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = mo * *rv + (T::one() - mo) * var[ch] * unbias;
        }
    }
}

impl<T: Real> Dense<T> {
    pub fn rows(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_width(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Neurons per task.
    pub fn out_per_task(&self) -> usize {
        self.rows() / self.tasks
    }

    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, w) = (x.batch(), x.stride0());
        if w != self.in_width() {
            return Err(NetError::Shape(format!("dense expects width {}, got {w}", self.in_width())));
        }
        let r = self.rows();
        let mut y = Tensor::zeros(&[n, r]);
        if let Some(b) = &self.bias {
            for row in y.data_mut().chunks_mut(r) {
                row.copy_from_slice(b.data());
            }
        }
        T::gemm(n, w, r, T::one(), x.data(), w as isize, 1, self.weight.data(), 1, w as isize, T::one(), y.data_mut(), r as isize, 1);
        Ok(y)
    }

    fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grads: &mut [Tensor<T>], need_dx: bool) -> Option<Tensor<T>> {
        let (n, w, r) = (x.batch(), self.in_width(), self.rows());
        T::gemm(r, n, w, T::one(), dy.data(), 1, r as isize, x.data(), w as isize, 1, T::one(), grads[0].data_mut(), w as isize, 1);
        if let Some(db) = grads.get_mut(1) {
            for row in dy.data().chunks(r) {
                for (a, b) in db.data_mut().iter_mut().zip(row) {
                    *a += *b;
                }
            }
        }
        need_dx.then(|| {
            let mut dx = Tensor::zeros(x.shape());
            T::gemm(n, r, w, T::one(), dy.data(), r as isize, 1, self.weight.data(), w as isize, 1, T::zero(), dx.data_mut(), w as isize, 1);
            dx
        })
    }
}

impl<T: Real> Layer<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv3d(_) => "conv3d",
            Layer::Relu => "relu",
            Layer::MaxPool3d { .. } => "maxpool3d",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Dropout { .. } => "dropout",
            Layer::Dense(_) => "dense",
            Layer::Concat { .. } => "concat",
            Layer::Softmax { .. } => "softmax",
            Layer::Loss { .. } => "loss",
        }
    }

    pub fn learnable(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv3d(c) => std::iter::once(&c.weight).chain(c.bias.as_ref()).collect(),
            Layer::Dense(d) => std::iter::once(&d.weight).chain(d.bias.as_ref()).collect(),
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            _ => Vec::new(),
        }
    }

    pub fn learnable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv3d(c) => std::iter::once(&mut c.weight).chain(c.bias.as_mut()).collect(),
            Layer::Dense(d) => std::iter::once(&mut d.weight).chain(d.bias.as_mut()).collect(),
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            _ => Vec::new(),
        }
    }

    /// Output shape (without the batch axis) for a given input shape.
    pub fn out_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let flat: usize = input.iter().product();
        Ok(match self {
            Layer::Conv3d(c) => {
                if input.len() != 4 || input[0] != c.in_channels() || input[1..].iter().any(|&e| e < c.kernel) {
                    return Err(NetError::Shape(format!("conv cannot take input {input:?}")));
                }
                let mut s = vec![c.out_channels()];
                s.extend(input[1..].iter().map(|&e| e + 1 - c.kernel));
                s
            }
            Layer::MaxPool3d { size, stride } => {
                if input.len() != 4 {
                    return Err(NetError::Shape(format!("pool cannot take input {input:?}")));
                }
                let mut s = vec![input[0]];
                s.extend(input[1..].iter().map(|&e| pool_extent(e, *size, *stride)));
                s
            }
            Layer::BatchNorm(b) => {
                if input[0] != b.channels() {
                    return Err(NetError::Shape(format!("batchnorm cannot take input {input:?}")));
                }
                input.to_vec()
            }
            Layer::Dense(d) => {
                if flat != d.in_width() {
                    return Err(NetError::Shape(format!("dense cannot take input {input:?}")));
                }
                vec![d.rows()]
            }
            Layer::Concat { width } => vec![flat + width],
            Layer::Relu | Layer::Dropout { .. } | Layer::Softmax { .. } | Layer::Loss { .. } => input.to_vec(),
        })
    }

    pub fn forward(&self, x: &Tensor<T>, coords: &[T], mode: &mut Mode) -> Result<(Tensor<T>, Aux<T>)> {
        Ok(match self {
            Layer::Conv3d(c) => (c.forward(x)?, Aux::None),
            Layer::Relu => {
                let d = x.data().iter().map(|&v| v.max(T::zero())).collect();
                (Tensor::from_vec(x.shape(), d), Aux::None)
            }
            Layer::MaxPool3d { size, stride } => {
                let (y, arg) = maxpool_forward(x, *size, *stride)?;
                (y, Aux::Pool(arg))
            }
            Layer::BatchNorm(b) => b.forward(x, mode.is_train())?,
            Layer::Dropout { rate } => {
                if !mode.is_train() || *rate == 0.0 {
                    (x.clone(), Aux::None)
                } else {
                    let rng = mode.rng.as_mut().expect("train mode carries an rng");
                    let keep = T::of(1.0 / (1.0 - rate));
                    let mask: Vec<T> = (0..x.len())
                        .map(|_| if rng.gen::<f64>() < *rate { T::zero() } else { keep })
                        .collect();
                    let d = x.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
                    (Tensor::from_vec(x.shape(), d), Aux::Dropout(mask))
                }
            }
            Layer::Dense(d) => (d.forward(x)?, Aux::None),
            Layer::Concat { width } => {
                let n = x.batch();
                if coords.len() != n * width {
                    return Err(NetError::Shape(format!(
                        "concat expects {} coordinate values, got {}",
                        n * width,
                        coords.len()
                    )));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(NetError::NonFiniteCoords);
                }
                let f = x.stride0();
                let mut out = Vec::with_capacity(n * (f + width));
                for i in 0..n {
                    out.extend_from_slice(x.sample(i));
                    out.extend_from_slice(&coords[i * width..(i + 1) * width]);
                }
                (Tensor::from_vec(&[n, f + width], out), Aux::None)
            }
            Layer::Softmax { .. } | Layer::Loss { .. } => (x.clone(), Aux::None),
        })
    }

    pub(crate) fn backward(
        &self,
        x: &Tensor<T>,
        aux: &Aux<T>,
        dy: Tensor<T>,
        grads: &mut [Tensor<T>],
        need_dx: bool,
    ) -> LayerGrad<T> {
        let mut dcoords = None;
        let dx = match self {
            Layer::Conv3d(c) => c.backward(x, &dy, grads, need_dx),
            Layer::Relu => {
                let mut dy = dy;
                for (g, &v) in dy.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                Some(dy)
            }
            Layer::MaxPool3d { .. } => {
                let Aux::Pool(arg) = aux else { unreachable!("pool trace") };
                let mut dx = Tensor::zeros(x.shape());
                for (&i, &g) in arg.iter().zip(dy.data()) {
                    dx.data_mut()[i as usize] += g;
                }
                Some(dx)
            }
            Layer::BatchNorm(b) => Some(b.backward(x, aux, &dy, grads)),
            Layer::Dropout { .. } => match aux {
                Aux::Dropout(mask) => {
                    let mut dy = dy;
                    dy.data_mut().iter_mut().zip(mask).for_each(|(g, &m)| *g *= m);
                    Some(dy)
                }
                _ => Some(dy),
            },
            Layer::Dense(d) => d.backward(x, &dy, grads, need_dx).map(|t| t.reshape(x.shape())),
            Layer::Concat { width } => {
                let n = x.batch();
                let f = x.stride0();
                let mut dx = Vec::with_capacity(n * f);
                let mut dc = Vec::with_capacity(n * width);
                for row in dy.data().chunks(f + width) {
                    dx.extend_from_slice(&row[..f]);
                    dc.extend_from_slice(&row[f..]);
                }
                dcoords = Some(dc);
                Some(Tensor::from_vec(x.shape(), dx))
            }
            Layer::Softmax { .. } | Layer::Loss { .. } => Some(dy),
        };
        LayerGrad { dx, dcoords }
    }
}
