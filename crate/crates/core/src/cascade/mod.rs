//! Dense patch-wise inference, multi-task vote averaging and the two-stage
//! foreground/structure cascade.

mod aggregate;
mod predict;

pub use aggregate::{aggregate, argmax_labels, compose, VoteAccumulator};
pub use predict::{predict_patches, Predictions};

use crate::net::{NetError, Network};
use crate::scalar::Real;
use crate::spectral::CoordField;
use crate::train::{standardize, TrainError};
use crate::volume::{BrainMask, Dims, ProbMap, Volume, VolumeError};

#[derive(Debug, thiserror::Error)]
pub enum CascadeError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid cascade config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, CascadeError>;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutput {
    /// Background plus one channel per structure.
    pub probmap: ProbMap,
    /// Aggregated foreground probability; 0 outside the mask.
    pub fg_prob: Vec<f32>,
}

/// Mask voxels whose coordinates are all multiples of `stride`.
pub fn strided_centers(mask: &BrainMask, stride: usize) -> Vec<usize> {
    let dims = mask.dims();
    mask.indices()
        .filter(|&v| {
            let c = dims.coords(v);
            c.iter().all(|&a| a % stride == 0)
        })
        .collect()
}

fn check_inputs(image: &Volume, mask: &BrainMask, coords: &CoordField, stride: usize) -> Result<Dims> {
    let dims = image.dims();
    if mask.dims() != dims || coords.dims() != dims {
        return Err(CascadeError::Shape(format!("image {dims:?}, mask {:?}, coordinates {:?}", mask.dims(), coords.dims())));
    }
    if stride == 0 {
        return Err(CascadeError::Config("stride must be positive".into()));
    }
    Ok(dims)
}

/// Two-stage segmentation. The foreground network runs at every (strided)
/// mask voxel; the structure network runs where the aggregated foreground
/// probability exceeds 0.5.
pub fn cascade<T: Real>(image: &Volume, mask: &BrainMask, coords: &CoordField, net_fg: &Network<T>, net_struct: &Network<T>, stride: usize) -> Result<CascadeOutput> {
    let dims = check_inputs(image, mask, coords, stride)?;
    if net_fg.class_count() != 2 {
        return Err(CascadeError::Config(format!("foreground network has {} classes, expected 2", net_fg.class_count())));
    }
    if net_fg.patch_size() != net_struct.patch_size() {
        return Err(CascadeError::Config("the two networks use different patch sizes".into()));
    }
    let intensities = standardize(image, mask)?;

    let preds = predict_patches(net_fg, &intensities, dims, coords, &strided_centers(mask, stride))?;
    let mut acc = VoteAccumulator::new(dims, 2);
    acc.deposit_predictions(&preds)?;
    let fg_prob: Vec<f32> = (0..dims.len())
        .map(|v| match (mask.get(v), acc.mean(v)) {
            (true, Some(m)) => m[1] as f32,
            _ => 0.0,
        })
        .collect();
    log::info!("foreground stage: {} patches", preds.centers.len());

    let gated: Vec<usize> = strided_centers(mask, stride).into_iter().filter(|&v| fg_prob[v] > 0.5).collect();
    let preds = predict_patches(net_struct, &intensities, dims, coords, &gated)?;
    let mut st = VoteAccumulator::new(dims, net_struct.class_count());
    st.deposit_predictions(&preds)?;
    log::info!("structure stage: {} patches", preds.centers.len());
    let gate: Vec<bool> = (0..dims.len()).map(|v| mask.get(v) && fg_prob[v] > 0.5 && st.counts()[v] > 0).collect();
    let probmap = compose(&fg_prob, &st.to_probmap(), &gate)?;
    Ok(CascadeOutput { probmap, fg_prob })
}

/// Single-network segmentation over background and all structures.
pub fn one_step<T: Real>(image: &Volume, mask: &BrainMask, coords: &CoordField, net: &Network<T>, stride: usize) -> Result<ProbMap> {
    let dims = check_inputs(image, mask, coords, stride)?;
    let intensities = standardize(image, mask)?;
    let preds = predict_patches(net, &intensities, dims, coords, &strided_centers(mask, stride))?;
    let mut map = aggregate(&preds, dims)?;
    aggregate::clear_outside(&mut map, mask);
    Ok(map)
}
