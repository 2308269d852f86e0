use std::collections::VecDeque;

use super::{Dims, Result, Volume, VolumeError};

/// Face-neighbor offsets, in (dx, dy, dz).
pub(crate) const FACE_OFFSETS: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Boolean brain mask on a voxel grid. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrainMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl BrainMask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(VolumeError::DataLength {
                expected: dims.len(),
                actual: bits.len(),
            });
        }
        if !bits.iter().any(|&b| b) {
            return Err(VolumeError::EmptyMask);
        }
        Ok(Self { dims, bits })
    }

    /// Mask from an explicit list of set voxel positions.
    pub fn from_points(dims: Dims, points: &[[usize; 3]]) -> Result<Self> {
        let mut bits = vec![false; dims.len()];
        for p in points {
            bits[dims.index(p[0], p[1], p[2])] = true;
        }
        Self::new(dims, bits)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Linear indices of set voxels, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// 6-connected components, each sorted ascending, ordered by first voxel.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let d = self.dims;
        let mut seen = vec![false; d.len()];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in self.indices() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(i) = queue.pop_front() {
                comp.push(i);
                let [x, y, z] = d.coords(i);
                for off in FACE_OFFSETS {
                    let p = [x as i64 + off[0], y as i64 + off[1], z as i64 + off[2]];
                    if let Some(j) = d.checked_index(p) {
                        if self.bits[j] && !seen[j] {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Keeps only the largest 6-connected component (first one on ties).
    pub fn largest_component(&self) -> BrainMask {
        let comps = self.connected_components();
        let best = comps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(_, c)| c)
            .expect("mask is non-empty");
        let mut bits = vec![false; self.dims.len()];
        for &i in best {
            bits[i] = true;
        }
        BrainMask { dims: self.dims, bits }
    }

    /// Dilates by a Euclidean ball of the given radius in voxels.
    pub fn dilate(&self, radius: f64) -> BrainMask {
        let d = self.dims;
        let r = radius.floor() as i64;
        let r2 = radius * radius;
        let mut ball = Vec::new();
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    if ((dx * dx + dy * dy + dz * dz) as f64) <= r2 {
                        ball.push([dx, dy, dz]);
                    }
                }
            }
        }
        let mut bits = vec![false; d.len()];
        for i in self.indices() {
            let [x, y, z] = d.coords(i);
            for off in &ball {
                let p = [x as i64 + off[0], y as i64 + off[1], z as i64 + off[2]];
                if let Some(j) = d.checked_index(p) {
                    bits[j] = true;
                }
            }
        }
        BrainMask { dims: d, bits }
    }

    /// The mask as a u8 volume (1 inside).
    pub fn to_volume(&self, spacing: [f32; 3]) -> Volume {
        let labels: Vec<u16> = self.bits.iter().map(|&b| b as u16).collect();
        Volume::from_labels(self.dims, spacing, &labels).expect("mask dims are valid")
    }
}

pub fn mask_from_nonzero(v: &Volume) -> Result<BrainMask> {
    let bits = (0..v.len()).map(|i| v.data().is_nonzero(i)).collect();
    BrainMask::new(v.dims(), bits)
}

/// Mean integer coordinate of the set voxels.
pub fn center_of_mass(m: &BrainMask) -> [f64; 3] {
    let mut acc = [0.0f64; 3];
    let mut n = 0usize;
    for i in m.indices() {
        let c = m.dims.coords(i);
        for a in 0..3 {
            acc[a] += c[a] as f64;
        }
        n += 1;
    }
    acc.map(|s| s / n as f64)
}
