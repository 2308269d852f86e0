//! Patch sampling, multi-task targets, the poly schedule, momentum SGD and
//! the training driver for both cascade networks.

mod driver;
mod patch;
mod sampling;
mod sgd;

pub use driver::{train, train_network, Batch, ReportLine, RunReport, TrainConfig, TrainImage, TrainOutput};
pub use patch::{extract_patch, fill_patch, multitask_targets, neighborhood_offsets, standardize};
pub use sampling::{build_sample, sample_centers, SampleCenter, SampleSet, SamplingPlan, Stage, TrainSample};
pub use sgd::{poly_lr, sgd_step, sgd_update};

use crate::net::NetError;
use crate::volume::VolumeError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("patch centre {center:?} outside grid {dims:?}")]
    CenterOutside { center: [usize; 3], dims: [usize; 3] },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("iteration {iter} outside [0, {max_iter}]")]
    IterOutOfRange { iter: usize, max_iter: usize },
    #[error("non-finite gradient {value} at {param}[{index}]")]
    NonFiniteGradient { param: String, index: usize, value: f64 },
    #[error("sampling produced no full minibatch")]
    NoSamples,
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
