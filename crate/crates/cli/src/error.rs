use std::fmt::Display;

use voxseg::cascade::CascadeError;
use voxseg::crf::CrfError;
use voxseg::net::NetError;
use voxseg::phantom::PhantomError;
use voxseg::spectral::SpectralError;
use voxseg::train::TrainError;

/// Failure classes with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("runtime: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn validation(e: impl Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    /// The message on one line, prefixed with its class.
    pub fn line(&self) -> String {
        let text = self.to_string();
        format!("error: {}", text.split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<voxseg::Error> for CliError {
    fn from(e: voxseg::Error) -> Self {
        use voxseg::Error as E;
        let invalid = matches!(
            &e,
            E::Crf(CrfError::Params(_))
                | E::Train(TrainError::Config(_))
                | E::Cascade(CascadeError::Config(_))
                | E::Net(NetError::Config(_))
                | E::Phantom(PhantomError::Spec(_))
                | E::Spectral(SpectralError::Disconnected { .. } | SpectralError::TooManyPairs { .. })
        );
        if invalid {
            CliError::validation(e)
        } else {
            CliError::runtime(e)
        }
    }
}

macro_rules! via_library {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                voxseg::Error::from(e).into()
            }
        }
    )*};
}

via_library!(voxseg::volume::VolumeError, SpectralError, NetError, TrainError, CascadeError, CrfError, PhantomError);
