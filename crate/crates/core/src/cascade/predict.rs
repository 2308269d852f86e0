use super::{CascadeError, Result};
use crate::net::{softmax_in_place, Layer, Mode, Network, Tensor};
use crate::scalar::Real;
use crate::spectral::{CoordField, COORD_WIDTH};
use crate::volume::Dims;

/// Per-centre, per-task class distributions, laid out
/// `[center][task][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub centers: Vec<usize>,
    pub tasks: usize,
    pub classes: usize,
    pub probs: Vec<f32>,
}

impl Predictions {
    pub fn distribution(&self, center: usize, task: usize) -> &[f32] {
        let off = (center * self.tasks + task) * self.classes;
        &self.probs[off..off + self.classes]
    }
}

/// Patches per forward call.
const BATCH: usize = 64;
/// Upper bound on cached first-layer activations, in elements.
const CACHE_LIMIT: usize = 24 << 20;
/// Upper bound on one im2col buffer, in elements.
const COLS_LIMIT: usize = 8 << 20;

/// First-layer activations for every patch position inside a box of
/// centres, so that each patch only runs the layers after it.
struct FirstLayer<T> {
    /// Volume coordinate of the lowest centre in the box.
    lo: [usize; 3],
    /// Cache extent `[x, y, z]`.
    ext: [usize; 3],
    channels: usize,
    /// Per-patch output extent of the first layer.
    out: usize,
    data: Vec<T>,
}

impl<T: Real> FirstLayer<T> {
    fn build(net: &Network<T>, image: &[f32], dims: Dims, lo: [usize; 3], hi: [usize; 3], relu: bool) -> Self {
        let conv = match &net.layers()[0].layer {
            Layer::Conv3d(c) => c,
            _ => unreachable!("networks start with a convolution"),
        };
        let (p, k) = (net.patch_size(), conv.kernel);
        let h = (p / 2) as i64;
        let out = p + 1 - k;
        let ext = [0, 1, 2].map(|a| hi[a] - lo[a] + out);
        let inp = ext.map(|e| e + k - 1);
        // Zero-padded input block covering every patch in the box.
        let mut block = vec![T::zero(); inp[0] * inp[1] * inp[2]];
        for z in 0..inp[2] {
            let vz = lo[2] as i64 - h + z as i64;
            if vz < 0 || vz >= dims.nz as i64 {
                continue;
            }
            for y in 0..inp[1] {
                let vy = lo[1] as i64 - h + y as i64;
                if vy < 0 || vy >= dims.ny as i64 {
                    continue;
                }
                for x in 0..inp[0] {
                    let vx = lo[0] as i64 - h + x as i64;
                    if vx >= 0 && vx < dims.nx as i64 {
                        block[(z * inp[1] + y) * inp[0] + x] = T::of(image[dims.index(vx as usize, vy as usize, vz as usize)] as f64);
                    }
                }
            }
        }
        let channels = conv.out_channels();
        let plane = ext[0] * ext[1];
        let mut data = vec![T::zero(); channels * plane * ext[2]];
        let slab = (COLS_LIMIT / (k.pow(3) * plane)).clamp(1, ext[2]);
        let mut cols = Vec::new();
        let mut buf = Vec::new();
        let mut z0 = 0;
        while z0 < ext[2] {
            let sz = slab.min(ext[2] - z0);
            let src = &block[z0 * inp[0] * inp[1]..(z0 + sz + k - 1) * inp[0] * inp[1]];
            buf.resize(channels * sz * plane, T::zero());
            conv.forward_sample(src, [sz + k - 1, inp[1], inp[0]], &mut buf, &mut cols);
            for c in 0..channels {
                let dst = &mut data[(c * ext[2] + z0) * plane..(c * ext[2] + z0 + sz) * plane];
                dst.copy_from_slice(&buf[c * sz * plane..(c + 1) * sz * plane]);
            }
            z0 += sz;
        }
        if relu {
            data.iter_mut().for_each(|v| *v = v.max(T::zero()));
        }
        Self { lo, ext, channels, out, data }
    }

    /// Copies the activations of the patch centred at `c` into `dst`
    /// (`[channels, out, out, out]`).
    fn gather(&self, c: [usize; 3], dst: &mut [T]) {
        let o = self.out;
        let [ex, ey, ez] = self.ext;
        let [bx, by, bz] = [0, 1, 2].map(|a| c[a] - self.lo[a]);
        let mut w = 0;
        for ch in 0..self.channels {
            for z in 0..o {
                for y in 0..o {
                    let s = ((ch * ez + bz + z) * ey + by + y) * ex + bx;
                    dst[w..w + o].copy_from_slice(&self.data[s..s + o]);
                    w += o;
                }
            }
        }
    }
}

/// Softmax distributions of every task at every centre, in infer mode.
///
/// `image` holds standardized intensities on the `dims` grid. The first
/// convolution is evaluated once over the bounding box of the centres and
/// shared by all overlapping patches.
pub fn predict_patches<T: Real>(net: &Network<T>, image: &[f32], dims: Dims, coords: &CoordField, centers: &[usize]) -> Result<Predictions> {
    if image.len() != dims.len() || coords.dims() != dims {
        return Err(CascadeError::Shape(format!("image of {} voxels and coordinates on {:?} for grid {dims:?}", image.len(), coords.dims())));
    }
    if let Some(&bad) = centers.iter().find(|&&c| c >= dims.len()) {
        return Err(CascadeError::Shape(format!("centre {bad} outside a grid of {} voxels", dims.len())));
    }
    let width = net.coord_width();
    if width > COORD_WIDTH {
        return Err(CascadeError::Shape(format!("network takes {width} coordinates, the field has {COORD_WIDTH}")));
    }
    let (tasks, classes) = (net.task_count(), net.class_count());
    let mut probs = vec![0.0f32; centers.len() * tasks * classes];
    let relu = matches!(net.layers().get(1).map(|l| &l.layer), Some(Layer::Relu));
    let start = if relu { 2 } else { 1 };

    // Centres sorted by z, split into groups whose caches fit the budget.
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by_key(|&i| (dims.coords(centers[i])[2], centers[i]));
    let conv_out = match &net.layers()[0].layer {
        Layer::Conv3d(c) => (c.out_channels(), net.patch_size() + 1 - c.kernel),
        _ => unreachable!("networks start with a convolution"),
    };
    let plane = (dims.nx + conv_out.1) * (dims.ny + conv_out.1) * conv_out.0;
    let rows = (CACHE_LIMIT / plane).saturating_sub(conv_out.1).max(1);
    let mut g0 = 0;
    while g0 < order.len() {
        let z_first = dims.coords(centers[order[g0]])[2];
        let mut g1 = g0;
        while g1 < order.len() && dims.coords(centers[order[g1]])[2] < z_first + rows {
            g1 += 1;
        }
        let group = &order[g0..g1];
        let mut lo = [usize::MAX; 3];
        let mut hi = [0; 3];
        for &i in group {
            let c = dims.coords(centers[i]);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        let cache = FirstLayer::build(net, image, dims, lo, hi, relu);
        let o = cache.out;
        let per = cache.channels * o * o * o;
        for chunk in group.chunks(BATCH) {
            let mut x = Tensor::zeros(&[chunk.len(), cache.channels, o, o, o]);
            let mut cs = Vec::with_capacity(chunk.len() * width);
            for (j, &i) in chunk.iter().enumerate() {
                cache.gather(dims.coords(centers[i]), &mut x.data_mut()[j * per..(j + 1) * per]);
                cs.extend(coords.get(centers[i])[..width].iter().map(|&v| T::of(v as f64)));
            }
            let mut logits = net.forward_from(start, x, &cs, &mut Mode::infer())?;
            logits.data_mut().chunks_mut(classes).for_each(softmax_in_place);
            for (j, &i) in chunk.iter().enumerate() {
                let dst = &mut probs[i * tasks * classes..(i + 1) * tasks * classes];
                for (d, s) in dst.iter_mut().zip(logits.sample(j)) {
                    *d = s.as_f64() as f32;
                }
            }
        }
        g0 = g1;
    }
    Ok(Predictions { centers: centers.to_vec(), tasks, classes, probs })
}
