//! Fully connected CRF over a 3D grid: Gaussian appearance and smoothness
//! kernels under Potts compatibility, mean-field inference by lattice
//! filtering, and an exact quadratic-cost oracle.

mod lattice;
mod meanfield;

pub use lattice::{permutohedral_filter, PermutohedralLattice, MAX_FEATURES};
pub use meanfield::{
    gibbs_energy, meanfield_exact, meanfield_exact_observed, meanfield_fast, meanfield_fast_observed, pairwise_kernel,
    EXACT_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::volume::{BrainMask, Dims, ProbMap, Volume, VolumeError};

/// Probability floor applied before taking logs.
pub const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CrfError {
    #[error("invalid CRF parameters: {0}")]
    Params(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{voxels} voxels exceed the exact-inference limit of {limit}")]
    TooLarge { voxels: usize, limit: usize },
    #[error("unsupported lattice feature dimension {0}")]
    FeatureDim(usize),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

pub type Result<T> = std::result::Result<T, CrfError>;

/// Kernel weights, bandwidths (millimetres and intensity units) and the
/// number of mean-field sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrfParams {
    /// Appearance (bilateral) kernel weight.
    pub v1: f64,
    /// Smoothness (spatial) kernel weight.
    pub v2: f64,
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub sigma_gamma: f64,
    pub iterations: usize,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self { v1: 3.0, v2: 3.0, sigma_alpha: 3.0, sigma_beta: 10.0, sigma_gamma: 3.0, iterations: 5 }
    }
}

impl CrfParams {
    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [("v1", self.v1), ("v2", self.v2)] {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        for (name, v) in [("sigma_alpha", self.sigma_alpha), ("sigma_beta", self.sigma_beta), ("sigma_gamma", self.sigma_gamma)] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if self.iterations == 0 {
            bad.push("iterations must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CrfError::Params(bad.join("; ")))
        }
    }
}

/// Per-voxel unary potentials `psi(l) = -log P(l)`, voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryField<T> {
    dims: Dims,
    n_labels: usize,
    psi: Vec<T>,
}

impl<T: Real> UnaryField<T> {
    pub fn new(dims: Dims, n_labels: usize, psi: Vec<T>) -> Result<Self> {
        if n_labels == 0 || psi.len() != dims.len() * n_labels {
            return Err(CrfError::Shape(format!("{} unaries for {} voxels x {n_labels} labels", psi.len(), dims.len())));
        }
        if let Some(p) = psi.iter().find(|p| !p.is_finite()) {
            return Err(CrfError::Shape(format!("non-finite unary {p}")));
        }
        Ok(Self { dims, n_labels, psi })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn as_slice(&self) -> &[T] {
        &self.psi
    }

    pub fn potentials(&self, voxel: usize) -> &[T] {
        &self.psi[voxel * self.n_labels..(voxel + 1) * self.n_labels]
    }
}

/// `psi = -log(max(P, floor))`. Non-positive floors fall back to the
/// smallest positive double.
pub fn unary_from_probmap<T: Real>(p: &ProbMap, floor: f64) -> UnaryField<T> {
    let floor = floor.max(f64::MIN_POSITIVE);
    let psi = p.as_slice().iter().map(|&x| T::of(-(x as f64).max(floor).ln())).collect();
    UnaryField { dims: p.dims(), n_labels: p.n_labels(), psi }
}

/// Mean-field marginals `Q`, voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState<T> {
    dims: Dims,
    n_labels: usize,
    q: Vec<T>,
}

impl<T: Real> MeanFieldState<T> {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn as_slice(&self) -> &[T] {
        &self.q
    }

    pub fn distribution(&self, voxel: usize) -> &[T] {
        &self.q[voxel * self.n_labels..(voxel + 1) * self.n_labels]
    }

    /// Most probable label per voxel, ties to the smaller label.
    pub fn argmax(&self) -> Vec<u16> {
        self.q.chunks_exact(self.n_labels).map(|d| crate::net::argmax(d) as u16).collect()
    }

    /// Largest `|sum_l Q(l) - 1|` over voxels.
    pub fn max_normalization_error(&self) -> f64 {
        self.q
            .chunks_exact(self.n_labels)
            .map(|d| (d.iter().map(|x| x.as_f64()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Converts to a probability map.
    pub fn to_probmap(&self) -> ProbMap {
        let probs = self.q.iter().map(|x| x.as_f64() as f32).collect();
        ProbMap::new(self.dims, self.n_labels, probs).expect("marginals are finite and nonnegative")
    }
}

/// Refines a probability map: fast mean field over the whole grid, then
/// the per-voxel argmax with voxels outside the mask forced to background.
///
/// Out-of-mask voxels take part in inference with whatever the map holds
/// there (background from the cascade), so structures next to the mask
/// border feel the surrounding background.
pub fn crf_refine(probmap: &ProbMap, image: &Volume, mask: &BrainMask, params: &CrfParams) -> Result<Volume> {
    let state = refine_marginals(probmap, image, mask, params)?;
    masked_labels(&state, mask, image.spacing())
}

/// Argmax of the marginals with voxels outside the mask set to background.
pub fn masked_labels(state: &MeanFieldState<f64>, mask: &BrainMask, spacing: [f32; 3]) -> Result<Volume> {
    if state.dims() != mask.dims() {
        return Err(CrfError::Shape(format!("marginals {:?}, mask {:?}", state.dims(), mask.dims())));
    }
    let mut labels = state.argmax();
    for (l, &inside) in labels.iter_mut().zip(mask.bits()) {
        if !inside {
            *l = 0;
        }
    }
    Ok(Volume::from_labels(state.dims(), spacing, &labels)?)
}

/// The mean-field marginals behind [`crf_refine`], over the whole grid.
pub fn refine_marginals(probmap: &ProbMap, image: &Volume, mask: &BrainMask, params: &CrfParams) -> Result<MeanFieldState<f64>> {
    let dims = image.dims();
    if probmap.dims() != dims || mask.dims() != dims {
        return Err(CrfError::Shape(format!("probabilities {:?}, image {dims:?}, mask {:?}", probmap.dims(), mask.dims())));
    }
    let unary = unary_from_probmap::<f64>(probmap, PROB_FLOOR);
    meanfield_fast(&unary, &image.to_f32_vec(), image.spacing(), None, params)
}
