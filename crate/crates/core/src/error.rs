use thiserror::Error;

use crate::{ctmc, distances, dp, embed, eval, multistrand, scattering};

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dp(#[from] dp::DpError),
    #[error(transparent)]
    Log(#[from] multistrand::LogError),
    #[error(transparent)]
    Ctmc(#[from] ctmc::CtmcError),
    #[error(transparent)]
    Scattering(#[from] scattering::ScatteringError),
    #[error(transparent)]
    Distance(#[from] distances::DistanceError),
    #[error(transparent)]
    Embed(#[from] embed::EmbedError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Bundle(#[from] crate::bundle::BundleError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
