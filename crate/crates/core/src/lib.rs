//! Volumetric brain-structure segmentation: a 3D patch network with
//! spectral coordinate inputs, a foreground/structure cascade with
//! multi-task vote averaging, and fully connected CRF refinement.
//!
//! Numerical types are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod scalar;
pub mod volume;
pub mod spectral;
pub mod net;
pub mod train;
pub mod cascade;
pub mod crf;
pub mod phantom;

pub type Tensor32 = net::Tensor<f32>;
pub type Tensor64 = net::Tensor<f64>;
pub type Network32 = net::Network<f32>;
pub type Network64 = net::Network<f64>;
pub type UnaryField32 = crf::UnaryField<f32>;
pub type UnaryField64 = crf::UnaryField<f64>;
pub type MeanFieldState32 = crf::MeanFieldState<f32>;
pub type MeanFieldState64 = crf::MeanFieldState<f64>;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Volume(#[from] volume::VolumeError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error(transparent)]
    Net(#[from] net::NetError),
    #[error(transparent)]
    Train(#[from] train::TrainError),
    #[error(transparent)]
    Cascade(#[from] cascade::CascadeError),
    #[error(transparent)]
    Crf(#[from] crf::CrfError),
    #[error(transparent)]
    Phantom(#[from] phantom::PhantomError),
}

pub type Result<T> = std::result::Result<T, Error>;
