//! Volumes, masks, label tables, probability maps and the Dice metric.
//!
//! All grids share one memory order: x fastest, then y, then z. A voxel at
//! `(x, y, z)` lives at `x + nx * (y + ny * z)`.

mod io;
mod labels;
mod mask;
mod metrics;
mod probmap;

pub use io::{read_volume, write_volume, write_volume_to, read_volume_from, VVOL_HEADER_LEN, VVOL_MAGIC};
pub use labels::{remap_labels, LabelEntry, LabelTable};
pub use mask::{center_of_mass, mask_from_nonzero, BrainMask};
pub use metrics::{dice, dice_per_label};
pub use probmap::ProbMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("truncated file: need {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 8]),
    #[error("unknown dtype code {0}")]
    BadDType(u8),
    #[error("payload holds {actual} bytes, header implies {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("dimensions must be positive, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("spacing must be strictly positive and finite, got {0:?}")]
    InvalidSpacing([f32; 3]),
    #[error("data length {actual} does not match dims product {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch(Dims, Dims),
    #[error("volume dtype {0:?} is not an integer type")]
    NotInteger(DType),
    #[error("invalid label table: {0}")]
    LabelTable(String),
    #[error("invalid probability map: {0}")]
    ProbMap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VolumeError>;

/// Grid extent in voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub const fn cube(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.nx;
        let yz = idx / self.nx;
        [x, yz % self.ny, yz / self.ny]
    }

    #[inline]
    pub fn contains(&self, p: [i64; 3]) -> bool {
        p[0] >= 0
            && p[1] >= 0
            && p[2] >= 0
            && (p[0] as usize) < self.nx
            && (p[1] as usize) < self.ny
            && (p[2] as usize) < self.nz
    }

    /// Linear index of a signed position, or `None` outside the grid.
    #[inline]
    pub fn checked_index(&self, p: [i64; 3]) -> Option<usize> {
        self.contains(p)
            .then(|| self.index(p[0] as usize, p[1] as usize, p[2] as usize))
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(VolumeError::InvalidDims(self.as_array()));
        }
        Ok(())
    }
}

/// On-disk voxel type. The discriminant is the VVOL dtype code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    U8 = 0,
    I16 = 1,
    F32 = 2,
    U16 = 3,
}

impl DType {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::U8),
            1 => Ok(DType::I16),
            2 => Ok(DType::F32),
            3 => Ok(DType::U16),
            other => Err(VolumeError::BadDType(other)),
        }
    }

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub const fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::I16 | DType::U16 => 2,
            DType::F32 => 4,
        }
    }

    pub const fn is_integer(self) -> bool {
        !matches!(self, DType::F32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VoxelData {
    U8(Vec<u8>),
    I16(Vec<i16>),
    F32(Vec<f32>),
    U16(Vec<u16>),
}

impl VoxelData {
    pub fn len(&self) -> usize {
        match self {
            VoxelData::U8(v) => v.len(),
            VoxelData::I16(v) => v.len(),
            VoxelData::F32(v) => v.len(),
            VoxelData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            VoxelData::U8(_) => DType::U8,
            VoxelData::I16(_) => DType::I16,
            VoxelData::F32(_) => DType::F32,
            VoxelData::U16(_) => DType::U16,
        }
    }

    #[inline]
    pub fn get_f64(&self, i: usize) -> f64 {
        match self {
            VoxelData::U8(v) => v[i] as f64,
            VoxelData::I16(v) => v[i] as f64,
            VoxelData::F32(v) => v[i] as f64,
            VoxelData::U16(v) => v[i] as f64,
        }
    }

    #[inline]
    fn get_i64(&self, i: usize) -> Option<i64> {
        match self {
            VoxelData::U8(v) => Some(v[i] as i64),
            VoxelData::I16(v) => Some(v[i] as i64),
            VoxelData::U16(v) => Some(v[i] as i64),
            VoxelData::F32(_) => None,
        }
    }

    #[inline]
    fn is_nonzero(&self, i: usize) -> bool {
        match self {
            VoxelData::U8(v) => v[i] != 0,
            VoxelData::I16(v) => v[i] != 0,
            VoxelData::F32(v) => v[i] != 0.0,
            VoxelData::U16(v) => v[i] != 0,
        }
    }
}

/// A 3D scalar grid with voxel spacing in millimeters.
///
/// Holds intensities, label maps, single probability channels or coordinate
/// channels alike. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: [f32; 3],
    data: VoxelData,
}

impl Volume {
    pub fn new(dims: Dims, spacing: [f32; 3], data: VoxelData) -> Result<Self> {
        dims.validate()?;
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(VolumeError::InvalidSpacing(spacing));
        }
        if data.len() != dims.len() {
            return Err(VolumeError::DataLength {
                expected: dims.len(),
                actual: data.len(),
            });
        }
        Ok(Self { dims, spacing, data })
    }

    pub fn from_f32(dims: Dims, spacing: [f32; 3], data: Vec<f32>) -> Result<Self> {
        Self::new(dims, spacing, VoxelData::F32(data))
    }

    /// Label volume with the narrowest unsigned type that holds `max_label`.
    pub fn from_labels(dims: Dims, spacing: [f32; 3], labels: &[u16]) -> Result<Self> {
        let max = labels.iter().copied().max().unwrap_or(0);
        let data = if max <= u8::MAX as u16 {
            VoxelData::U8(labels.iter().map(|&l| l as u8).collect())
        } else {
            VoxelData::U16(labels.to_vec())
        };
        Self::new(dims, spacing, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f32; 3] {
        self.spacing
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &VoxelData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.data.get_f64(idx)
    }

    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            VoxelData::F32(v) => v.clone(),
            _ => (0..self.len()).map(|i| self.data.get_f64(i) as f32).collect(),
        }
    }

    /// Label ids of an integer volume. Negative values map to background.
    pub fn labels(&self) -> Result<Vec<u16>> {
        if !self.dtype().is_integer() {
            return Err(VolumeError::NotInteger(self.dtype()));
        }
        Ok((0..self.len())
            .map(|i| {
                let v = self.data.get_i64(i).unwrap_or(0);
                v.clamp(0, u16::MAX as i64) as u16
            })
            .collect())
    }

    pub fn same_grid(&self, other: &Volume) -> Result<()> {
        if self.dims != other.dims {
            return Err(VolumeError::DimMismatch(self.dims, other.dims));
        }
        Ok(())
    }
}
