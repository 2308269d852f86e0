//! VVOL binary volume format.
//!
//! ```text
//! offset  size  field
//!      0     8  magic "VVOL0001"
//!      8    12  nx, ny, nz            u32 little-endian
//!     20     1  dtype code            0=u8 1=i16 2=f32 3=u16
//!     21    12  sx, sy, sz (mm)       f32 little-endian
//!     33     -  payload, x fastest, little-endian
//! ```

use std::fs;
use std::path::Path;

use super::{DType, Dims, Result, Volume, VolumeError, VoxelData};

pub const VVOL_MAGIC: &[u8; 8] = b"VVOL0001";
pub const VVOL_HEADER_LEN: usize = 33;

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let bytes = fs::read(path)?;
    read_volume_from(&bytes)
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_volume_to(v))?;
    Ok(())
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

pub fn read_volume_from(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < 8 {
        return Err(VolumeError::Truncated {
            needed: VVOL_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 8] = bytes[..8].try_into().unwrap();
    if &magic != VVOL_MAGIC {
        return Err(VolumeError::BadMagic(magic));
    }
    if bytes.len() < VVOL_HEADER_LEN {
        return Err(VolumeError::Truncated {
            needed: VVOL_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let dims = Dims::new(
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
    );
    let dtype = DType::from_code(bytes[20])?;
    let spacing = [f32_at(bytes, 21), f32_at(bytes, 25), f32_at(bytes, 29)];
    let payload = &bytes[VVOL_HEADER_LEN..];
    let expected = dims
        .nx
        .checked_mul(dims.ny)
        .and_then(|n| n.checked_mul(dims.nz))
        .and_then(|n| n.checked_mul(dtype.size()))
        .ok_or(VolumeError::InvalidDims(dims.as_array()))?;
    if payload.len() != expected {
        return Err(VolumeError::SizeMismatch {
            expected,
            actual: payload.len(),
        });
    }
    let data = match dtype {
        DType::U8 => VoxelData::U8(payload.to_vec()),
        DType::I16 => VoxelData::I16(
            payload
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        DType::U16 => VoxelData::U16(
            payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        DType::F32 => VoxelData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Volume::new(dims, spacing, data)
}

pub fn write_volume_to(v: &Volume) -> Vec<u8> {
    let dims = v.dims();
    let mut out = Vec::with_capacity(VVOL_HEADER_LEN + v.len() * v.dtype().size());
    out.extend_from_slice(VVOL_MAGIC);
    for n in dims.as_array() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.push(v.dtype().code());
    for s in v.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    match v.data() {
        VoxelData::U8(d) => out.extend_from_slice(d),
        VoxelData::I16(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::U16(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::F32(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}
