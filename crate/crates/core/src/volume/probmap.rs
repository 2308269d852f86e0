use super::{BrainMask, Dims, Result, Volume, VolumeError};

/// Per-voxel categorical distribution over `n_labels` labels, voxel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    dims: Dims,
    n_labels: usize,
    probs: Vec<f32>,
}

impl ProbMap {
    pub fn new(dims: Dims, n_labels: usize, probs: Vec<f32>) -> Result<Self> {
        if n_labels == 0 {
            return Err(VolumeError::ProbMap("label count must be positive".into()));
        }
        if probs.len() != dims.len() * n_labels {
            return Err(VolumeError::DataLength {
                expected: dims.len() * n_labels,
                actual: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(VolumeError::ProbMap(format!("invalid probability {p}")));
        }
        Ok(Self { dims, n_labels, probs })
    }

    /// Every voxel certain background.
    pub fn background(dims: Dims, n_labels: usize) -> Self {
        let mut probs = vec![0.0; dims.len() * n_labels];
        probs.iter_mut().step_by(n_labels).for_each(|p| *p = 1.0);
        Self { dims, n_labels, probs }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.probs
    }

    #[inline]
    pub fn distribution(&self, voxel: usize) -> &[f32] {
        &self.probs[voxel * self.n_labels..(voxel + 1) * self.n_labels]
    }

    #[inline]
    pub fn distribution_mut(&mut self, voxel: usize) -> &mut [f32] {
        &mut self.probs[voxel * self.n_labels..(voxel + 1) * self.n_labels]
    }

    /// One label's probabilities as a float volume.
    pub fn channel(&self, label: usize, spacing: [f32; 3]) -> Volume {
        let data = self.probs.iter().skip(label).step_by(self.n_labels).copied().collect();
        Volume::from_f32(self.dims, spacing, data).expect("dims already validated")
    }

    /// Reassembles a map from one float volume per label.
    pub fn from_channels(channels: &[Volume]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| VolumeError::ProbMap("no channels".into()))?;
        let dims = first.dims();
        let n = channels.len();
        let mut probs = vec![0.0f32; dims.len() * n];
        for (l, ch) in channels.iter().enumerate() {
            first.same_grid(ch)?;
            for (i, v) in ch.to_f32_vec().into_iter().enumerate() {
                probs[i * n + l] = v;
            }
        }
        Self::new(dims, n, probs)
    }

    /// Checks the normalization contract: in-mask sums within `tol` of 1,
    /// outside-mask voxels certain background.
    pub fn check(&self, mask: &BrainMask, tol: f64) -> Result<()> {
        if mask.dims() != self.dims {
            return Err(VolumeError::DimMismatch(mask.dims(), self.dims));
        }
        for i in 0..self.dims.len() {
            let d = self.distribution(i);
            if mask.get(i) {
                let s: f64 = d.iter().map(|&p| p as f64).sum();
                if (s - 1.0).abs() > tol {
                    return Err(VolumeError::ProbMap(format!("voxel {i} sums to {s}")));
                }
            } else if d[0] != 1.0 || d[1..].iter().any(|&p| p != 0.0) {
                return Err(VolumeError::ProbMap(format!(
                    "voxel {i} outside mask is not background"
                )));
            }
        }
        Ok(())
    }
}
