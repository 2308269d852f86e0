//! DNMD model files.
//!
//! Little-endian: magic `DNMD0001`, `u32` layer count, then per layer a `u8`
//! kind code, `u32` name length and UTF-8 name, `u32` tensor count and the
//! tensors, each as `u8` rank, `rank` `u32` dims and `f32` payload. The first
//! tensor of every layer is a rank-1 hyperparameter vector:
//!
//! | kind | code | config | parameter tensors |
//! |------|------|--------|-------------------|
//! | conv3d | 0 | kernel, input extent, has bias | weight `[out, in, k, k, k]`, bias |
//! | relu | 1 | (empty) | |
//! | maxpool3d | 2 | size, stride | |
//! | batchnorm | 3 | eps, momentum | gamma, beta, moving mean, moving variance |
//! | dropout | 4 | rate | |
//! | dense | 5 | tasks, has bias | weight `[rows, in]`, bias |
//! | concat | 6 | width | |
//! | softmax | 7 | classes, tasks | |
//! | loss | 8 | tasks | |

use std::path::Path;

use super::layers::{BatchNorm, Conv3d, Dense, Layer};
use super::network::{NamedLayer, Network};
use super::{NetError, Result, Tensor};
use crate::scalar::Real;

pub const DNMD_MAGIC: &[u8; 8] = b"DNMD0001";

fn kind_code<T>(l: &Layer<T>) -> u8 {
    match l {
        Layer::Conv3d(_) => 0,
        Layer::Relu => 1,
        Layer::MaxPool3d { .. } => 2,
        Layer::BatchNorm(_) => 3,
        Layer::Dropout { .. } => 4,
        Layer::Dense(_) => 5,
        Layer::Concat { .. } => 6,
        Layer::Softmax { .. } => 7,
        Layer::Loss { .. } => 8,
    }
}

fn put_tensor(out: &mut Vec<u8>, shape: &[usize], data: impl Iterator<Item = f32>) {
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put<T: Real>(out: &mut Vec<u8>, t: &Tensor<T>) {
    put_tensor(out, t.shape(), t.data().iter().map(|v| v.as_f64() as f32));
}

fn put_config(out: &mut Vec<u8>, v: &[f64]) {
    put_tensor(out, &[v.len()], v.iter().map(|&x| x as f32));
}

/// Serializes a network. Parameters are stored as `f32`.
pub fn encode_model<T: Real>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DNMD_MAGIC);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for NamedLayer { name, layer } in net.layers() {
        out.push(kind_code(layer));
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let count = 1 + layer.learnable().len() + usize::from(matches!(layer, Layer::BatchNorm(_))) * 2;
        out.extend_from_slice(&(count as u32).to_le_bytes());
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        match layer {
            Layer::Conv3d(c) => {
                put_config(&mut out, &[c.kernel as f64, c.in_extent as f64, flag(c.bias.is_some())]);
                put(&mut out, &c.weight);
                if let Some(b) = &c.bias {
                    put(&mut out, b);
                }
            }
            Layer::Relu => put_config(&mut out, &[]),
            Layer::MaxPool3d { size, stride } => put_config(&mut out, &[*size as f64, *stride as f64]),
            Layer::BatchNorm(b) => {
                put_config(&mut out, &[b.eps, b.momentum]);
                for t in [&b.gamma, &b.beta, &b.running_mean, &b.running_var] {
                    put(&mut out, t);
                }
            }
            Layer::Dropout { rate } => put_config(&mut out, &[*rate]),
            Layer::Dense(d) => {
                put_config(&mut out, &[d.tasks as f64, flag(d.bias.is_some())]);
                put(&mut out, &d.weight);
                if let Some(b) = &d.bias {
                    put(&mut out, b);
                }
            }
            Layer::Concat { width } => put_config(&mut out, &[*width as f64]),
            Layer::Softmax { classes, tasks } => put_config(&mut out, &[*classes as f64, *tasks as f64]),
            Layer::Loss { tasks } => put_config(&mut out, &[*tasks as f64]),
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(NetError::Truncated(self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensor<T: Real>(&mut self) -> Result<Tensor<T>> {
        let rank = self.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| NetError::Format("tensor too large".into()))?;
        let bytes = self.take(n.checked_mul(4).ok_or(NetError::Truncated(self.pos))?)?;
        let data = bytes.chunks_exact(4).map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64)).collect();
        Ok(Tensor::from_vec(&shape, data))
    }
}

/// Hyperparameters are stored as `f32`; reading them back through their
/// shortest decimal form recovers values such as `1e-5` exactly.
fn config_real(cfg: &[f64], i: usize, what: &str) -> Result<f64> {
    let v = *cfg.get(i).ok_or_else(|| NetError::Format(format!("{what}: missing config entry {i}")))?;
    Ok((v as f32).to_string().parse().expect("float formatting round-trips"))
}

fn config_usize(cfg: &[f64], i: usize, what: &str) -> Result<usize> {
    let v = *cfg.get(i).ok_or_else(|| NetError::Format(format!("{what}: missing config entry {i}")))?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(NetError::Format(format!("{what}: config entry {i} = {v} is not a count")));
    }
    Ok(v as usize)
}

fn expect_shape<T: Real>(t: &Tensor<T>, shape: &[usize], what: &str) -> Result<()> {
    if t.shape() != shape {
        return Err(NetError::Format(format!("{what}: tensor shape {:?}, expected {shape:?}", t.shape())));
    }
    Ok(())
}

pub fn decode_model<T: Real>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(8)?;
    if magic != DNMD_MAGIC {
        return Err(NetError::BadMagic(magic.try_into().unwrap()));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let code = r.u8()?;
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| NetError::Format("layer name is not UTF-8".into()))?;
        let nt = r.u32()? as usize;
        if nt == 0 {
            return Err(NetError::Format(format!("{name}: missing config tensor")));
        }
        let cfg_t: Tensor<f64> = r.tensor()?;
        if cfg_t.rank() != 1 {
            return Err(NetError::Format(format!("{name}: config tensor must be rank 1")));
        }
        let cfg = cfg_t.data().to_vec();
        let mut params: Vec<Tensor<T>> = Vec::with_capacity(nt - 1);
        for _ in 1..nt {
            params.push(r.tensor()?);
        }
        let want_params = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(NetError::Format(format!("{name}: {} parameter tensors, expected {n}", params.len())));
            }
            Ok(())
        };
        let layer = match code {
            0 => {
                let k = config_usize(&cfg, 0, &name)?;
                let extent = config_usize(&cfg, 1, &name)?;
                let has_bias = config_usize(&cfg, 2, &name)? == 1;
                want_params(1 + usize::from(has_bias))?;
                let mut it = params.into_iter();
                let weight = it.next().unwrap();
                let s = weight.shape().to_vec();
                if s.len() != 5 || s[2..] != [k, k, k] {
                    return Err(NetError::Format(format!("{name}: conv weight shape {s:?}")));
                }
                let bias = it.next();
                if let Some(b) = &bias {
                    expect_shape(b, &[s[0]], &name)?;
                }
                Layer::Conv3d(Conv3d { kernel: k, in_extent: extent, weight, bias })
            }
            1 => Layer::Relu,
            2 => Layer::MaxPool3d { size: config_usize(&cfg, 0, &name)?, stride: config_usize(&cfg, 1, &name)? },
            3 => {
                want_params(4)?;
                let c = params[0].len();
                for p in &params {
                    expect_shape(p, &[c], &name)?;
                }
                let mut it = params.into_iter();
                Layer::BatchNorm(BatchNorm {
                    eps: config_real(&cfg, 0, &name)?,
                    momentum: config_real(&cfg, 1, &name)?,
                    gamma: it.next().unwrap(),
                    beta: it.next().unwrap(),
                    running_mean: it.next().unwrap(),
                    running_var: it.next().unwrap(),
                })
            }
            4 => Layer::Dropout { rate: config_real(&cfg, 0, &name)? },
            5 => {
                let tasks = config_usize(&cfg, 0, &name)?;
                let has_bias = config_usize(&cfg, 1, &name)? == 1;
                want_params(1 + usize::from(has_bias))?;
                let mut it = params.into_iter();
                let weight = it.next().unwrap();
                if weight.rank() != 2 || tasks == 0 || weight.shape()[0] % tasks != 0 {
                    return Err(NetError::Format(format!("{name}: dense weight shape {:?}", weight.shape())));
                }
                let bias = it.next();
                if let Some(b) = &bias {
                    expect_shape(b, &[weight.shape()[0]], &name)?;
                }
                Layer::Dense(Dense { tasks, weight, bias })
            }
            6 => Layer::Concat { width: config_usize(&cfg, 0, &name)? },
            7 => Layer::Softmax { classes: config_usize(&cfg, 0, &name)?, tasks: config_usize(&cfg, 1, &name)? },
            8 => Layer::Loss { tasks: config_usize(&cfg, 0, &name)? },
            other => return Err(NetError::Format(format!("{name}: unknown layer kind {other}"))),
        };
        layers.push(NamedLayer { name, layer });
    }
    if r.pos != bytes.len() {
        return Err(NetError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Network::from_layers(layers)
}

pub fn save_model<T: Real>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_model(net))?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<Network<T>> {
    decode_model(&std::fs::read(path)?)
}
