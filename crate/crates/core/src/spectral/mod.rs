//! Spectral brain coordinates: low eigenfunctions of the mask's graph
//! Laplacian, plus centered Cartesian coordinates.

mod coords;
mod lanczos;
mod laplacian;
mod symeig;

pub use coords::{coordinate_features, coordinate_field, coordinate_field_from_channels, spectral_coordinates, CoordField, SpectralCoords, SpectralReport, COORD_WIDTH};
pub use lanczos::{
    lowest_in_complement, smallest_eigenpairs, smallest_eigenpairs_with, EigenOptions, EigenPair,
    EigenSolution, SymmetricOperator,
};
pub use laplacian::{build_laplacian, SparseLaplacian};

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge: best residual {residual:.3e} after {matvecs} matrix-vector products")]
    NoConvergence { residual: f64, matvecs: usize },
    #[error("requested {k} eigenpairs of a {n}-dimensional operator")]
    TooManyPairs { k: usize, n: usize },
    #[error("mask is not 6-connected: component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },
    #[error(transparent)]
    Volume(#[from] crate::volume::VolumeError),
}
