use super::{Result, TrainError};
use crate::net::Tensor;
use crate::scalar::Real;
use crate::volume::{BrainMask, Dims, Volume, VolumeError};

/// Label offsets `[dx, dy, dz]` predicted by the heads of a multi-task net.
///
/// The centre comes first; the remaining offsets follow in lexicographic
/// `(dz, dy, dx)` order. For 7 tasks that is `-z, -y, -x, +x, +y, +z`.
pub fn neighborhood_offsets(neighborhood: usize) -> Result<Vec<[i64; 3]>> {
    let mut rest = Vec::new();
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                let keep = match neighborhood {
                    1 => false,
                    7 => manhattan == 1,
                    27 => manhattan > 0,
                    n => return Err(TrainError::Config(format!("neighborhood {n} must be 1, 7 or 27"))),
                };
                if keep {
                    rest.push([dx, dy, dz]);
                }
            }
        }
    }
    let mut out = vec![[0, 0, 0]];
    out.extend(rest);
    Ok(out)
}

fn offset(p: [usize; 3], d: [i64; 3]) -> [i64; 3] {
    [p[0] as i64 + d[0], p[1] as i64 + d[1], p[2] as i64 + d[2]]
}

/// Copies the `size^3` window centred at `center` into `out` (z-major, x
/// fastest). Voxels outside the grid read as zero.
pub fn fill_patch<T: Real>(data: &[f32], dims: Dims, center: [i64; 3], size: usize, out: &mut [T]) {
    debug_assert_eq!(out.len(), size * size * size);
    let h = (size / 2) as i64;
    let [nx, ny, nz] = [dims.nx as i64, dims.ny as i64, dims.nz as i64];
    let x0 = center[0] - h;
    // Clipped x range, shared by every row of the window.
    let lo = (-x0).clamp(0, size as i64) as usize;
    let hi = (nx - x0).clamp(0, size as i64) as usize;
    let mut o = 0;
    for k in 0..size as i64 {
        let z = center[2] - h + k;
        for j in 0..size as i64 {
            let y = center[1] - h + j;
            let row = &mut out[o..o + size];
            o += size;
            if z < 0 || z >= nz || y < 0 || y >= ny || lo >= hi {
                row.iter_mut().for_each(|v| *v = T::zero());
                continue;
            }
            row[..lo].iter_mut().for_each(|v| *v = T::zero());
            row[hi..].iter_mut().for_each(|v| *v = T::zero());
            let start = ((z * ny + y) * nx + x0 + lo as i64) as usize;
            for (v, s) in row[lo..hi].iter_mut().zip(&data[start..start + hi - lo]) {
                *v = T::of(*s as f64);
            }
        }
    }
}

/// The `size^3` patch of `v` centred at `center`, zero padded at the borders.
pub fn extract_patch(v: &Volume, center: [usize; 3], size: usize) -> Result<Tensor<f32>> {
    let dims = v.dims();
    if !dims.contains([center[0] as i64, center[1] as i64, center[2] as i64]) {
        return Err(TrainError::CenterOutside { center, dims: dims.as_array() });
    }
    if size % 2 == 0 {
        return Err(TrainError::Config(format!("patch size {size} must be odd")));
    }
    let mut out = Tensor::zeros(&[size, size, size]);
    let center = [center[0] as i64, center[1] as i64, center[2] as i64];
    fill_patch(&v.to_f32_vec(), dims, center, size, out.data_mut());
    Ok(out)
}

/// Raw labels at the centre and its neighbours, in
/// [`neighborhood_offsets`] order. Neighbours outside the grid read as 0.
pub fn multitask_targets(seg: &Volume, center: [usize; 3], neighborhood: usize) -> Result<Vec<u16>> {
    let labels = seg.labels()?;
    let dims = seg.dims();
    if !dims.contains([center[0] as i64, center[1] as i64, center[2] as i64]) {
        return Err(TrainError::CenterOutside { center, dims: dims.as_array() });
    }
    Ok(raw_targets(&labels, dims, dims.index(center[0], center[1], center[2]), &neighborhood_offsets(neighborhood)?))
}

pub(crate) fn raw_targets(labels: &[u16], dims: Dims, voxel: usize, offsets: &[[i64; 3]]) -> Vec<u16> {
    let c = dims.coords(voxel);
    offsets.iter().map(|&d| dims.checked_index(offset(c, d)).map_or(0, |i| labels[i])).collect()
}

/// Intensities standardized to zero mean and unit variance over the mask.
/// Voxels outside the mask are set to 0, matching the zero padding of
/// patches at the grid border.
pub fn standardize(image: &Volume, mask: &BrainMask) -> Result<Vec<f32>> {
    if image.dims() != mask.dims() {
        return Err(VolumeError::DimMismatch(image.dims(), mask.dims()).into());
    }
    let raw = image.to_f32_vec();
    let n = mask.count() as f64;
    if n == 0.0 {
        return Err(VolumeError::EmptyMask.into());
    }
    let mean = mask.indices().map(|i| raw[i] as f64).sum::<f64>() / n;
    let var = mask.indices().map(|i| (raw[i] as f64 - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
    Ok(raw
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| if m { ((v as f64 - mean) * scale) as f32 } else { 0.0 })
        .collect())
}
