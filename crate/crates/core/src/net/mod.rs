//! Minimal 3D CNN: tensors, layers with forward and backward passes, Xavier
//! initialization, the multi-task patch classifier and DNMD model files.

pub mod gradcheck;
mod init;
mod io;
mod layers;
mod loss;
mod network;
mod tensor;

pub use init::{conv_fans, xavier_bound, xavier_init};
pub use io::{decode_model, encode_model, load_model, save_model, DNMD_MAGIC};
pub use layers::{pool_extent, Aux, BatchNorm, Conv3d, Dense, Layer, Mode, Phase};
pub use loss::{argmax, softmax_in_place, softmax_loss, softmax_tasks, LossOutput, IGNORE};
pub use network::{build_canonical, CensusRow, Gradients, NamedLayer, NetConfig, Network, Trace};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("batch norm in train mode needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error("target {target} outside [0, {classes})")]
    TargetOutOfRange { target: u16, classes: usize },
    #[error("coordinate input is not finite")]
    NonFiniteCoords,
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("bad model magic {0:?}")]
    BadMagic([u8; 8]),
    #[error("model file truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed model: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;
