use serde::{Deserialize, Serialize};

use super::{build_laplacian, smallest_eigenpairs, EigenPair, SpectralError};
use crate::volume::{center_of_mass, BrainMask, Dims, Volume};

/// Channels per voxel: three spectral, three centered Cartesian.
pub const COORD_WIDTH: usize = 6;

/// Sign-fixed low eigenfunctions of a mask Laplacian.
#[derive(Debug, Clone)]
pub struct SpectralCoords {
    dims: Dims,
    /// The three smallest non-zero eigenpairs, vectors indexed by mask row.
    pub pairs: Vec<EigenPair>,
    pub matvecs: usize,
    /// Standardized channels on the full grid, zero outside the mask.
    channels: [Vec<f32>; 3],
}

/// JSON sidecar written next to the eigenfunction volumes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectralReport {
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub lambda_3: f64,
    pub residuals: [f64; 3],
    pub matvecs: usize,
    pub voxels: usize,
}

impl SpectralCoords {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn channel_volume(&self, i: usize, spacing: [f32; 3]) -> Volume {
        Volume::from_f32(self.dims, spacing, self.channels[i].clone()).expect("grid-sized channel")
    }

    pub fn report(&self) -> SpectralReport {
        SpectralReport {
            lambda_1: self.pairs[0].lambda,
            lambda_2: self.pairs[1].lambda,
            lambda_3: self.pairs[2].lambda,
            residuals: [self.pairs[0].residual, self.pairs[1].residual, self.pairs[2].residual],
            matvecs: self.matvecs,
            voxels: self.pairs[0].vector.len(),
        }
    }
}

fn centered_positions(mask: &BrainMask) -> [Vec<f64>; 3] {
    let c = center_of_mass(mask);
    let dims = mask.dims();
    let mut out: [Vec<f64>; 3] = Default::default();
    for v in mask.indices() {
        let p = dims.coords(v);
        for a in 0..3 {
            out[a].push(p[a] as f64 - c[a]);
        }
    }
    out
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Flips `f` so its strongest Cartesian correlation is positive, or, when it
/// is uncorrelated with all three axes, so its largest-magnitude entry is.
fn fix_sign(f: &mut [f64], cart: &[Vec<f64>; 3]) {
    let mut best = 0.0f64;
    for axis in cart {
        let c = correlation(f, axis);
        if c.abs() > best.abs() {
            best = c;
        }
    }
    let flip = if best.abs() >= 1e-6 {
        best < 0.0
    } else {
        let mut big = 0.0f64;
        for &x in f.iter() {
            if x.abs() > big.abs() {
                big = x;
            }
        }
        big < 0.0
    };
    if flip {
        f.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The first three non-constant Laplacian eigenfunctions of a connected mask.
pub fn spectral_coordinates(mask: &BrainMask) -> Result<SpectralCoords, SpectralError> {
    let comps = mask.connected_components();
    if comps.len() > 1 {
        let mut sizes: Vec<usize> = comps.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        return Err(SpectralError::Disconnected { sizes });
    }
    let lap = build_laplacian(mask);
    let sol = smallest_eigenpairs(&lap, 4)?;
    let cart = centered_positions(mask);
    let dims = mask.dims();
    let mut pairs = Vec::with_capacity(3);
    let mut channels: [Vec<f32>; 3] = Default::default();
    for (k, mut p) in sol.pairs.into_iter().skip(1).enumerate() {
        fix_sign(&mut p.vector, &cart);
        let n = p.vector.len() as f64;
        let mean = p.vector.iter().sum::<f64>() / n;
        let var = p.vector.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let mut grid = vec![0.0f32; dims.len()];
        for (row, &v) in lap.voxels().iter().enumerate() {
            grid[v] = ((p.vector[row] - mean) / sd) as f32;
        }
        channels[k] = grid;
        pairs.push(p);
    }
    Ok(SpectralCoords { dims, pairs, matvecs: sol.matvecs, channels })
}

/// Per-voxel 6-vectors `(e1, e2, e3, x - cx, y - cy, z - cz)`, zero outside
/// the mask. Cartesian channels are in voxel units.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordField {
    dims: Dims,
    values: Vec<[f32; COORD_WIDTH]>,
}

impl CoordField {
    /// All-zero field, used to ablate coordinate inputs.
    pub fn zeros(dims: Dims) -> Self {
        Self { dims, values: vec![[0.0; COORD_WIDTH]; dims.len()] }
    }

    pub fn from_values(dims: Dims, values: Vec<[f32; COORD_WIDTH]>) -> Self {
        assert_eq!(values.len(), dims.len(), "coordinate field length");
        Self { dims, values }
    }

    /// Assembles a field from six grid channels.
    pub fn from_channels(channels: &[Volume]) -> Result<Self, SpectralError> {
        assert_eq!(channels.len(), COORD_WIDTH, "coordinate channel count");
        let dims = channels[0].dims();
        let mut values = vec![[0.0; COORD_WIDTH]; dims.len()];
        for (c, vol) in channels.iter().enumerate() {
            channels[0].same_grid(vol)?;
            for (i, x) in vol.to_f32_vec().into_iter().enumerate() {
                values[i][c] = x;
            }
        }
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, voxel: usize) -> [f32; COORD_WIDTH] {
        self.values[voxel]
    }

    pub fn values(&self) -> &[[f32; COORD_WIDTH]] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

pub fn coordinate_features(mask: &BrainMask) -> Result<CoordField, SpectralError> {
    let spectral = spectral_coordinates(mask)?;
    Ok(coordinate_field(mask, &spectral))
}

/// Combines precomputed spectral channels with centered Cartesian ones.
pub fn coordinate_field(mask: &BrainMask, spectral: &SpectralCoords) -> CoordField {
    coordinate_field_from_channels(mask, [spectral.channel(0), spectral.channel(1), spectral.channel(2)])
}

/// As [`coordinate_field`], from three grid-sized spectral channels such as
/// those written by the `spectral` command.
pub fn coordinate_field_from_channels(mask: &BrainMask, spectral: [&[f32]; 3]) -> CoordField {
    let dims = mask.dims();
    for ch in spectral {
        assert_eq!(ch.len(), dims.len(), "spectral channel length");
    }
    let c = center_of_mass(mask);
    let mut values = vec![[0.0f32; COORD_WIDTH]; dims.len()];
    for v in mask.indices() {
        let p = dims.coords(v);
        let out = &mut values[v];
        for k in 0..3 {
            out[k] = spectral[k][v];
            out[3 + k] = (p[k] as f64 - c[k]) as f32;
        }
    }
    CoordField { dims, values }
}
