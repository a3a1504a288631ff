use thiserror::Error;

use crate::{compositor, dyngs, envmap, lightmodel, noisekit, radiometry, synthoracle};

/// Any engine error, tagged by the subsystem it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Radiometry(#[from] radiometry::RadiometryError),
    #[error(transparent)]
    Light(#[from] lightmodel::LightError),
    #[error(transparent)]
    Env(#[from] envmap::EnvError),
    #[error(transparent)]
    Composite(#[from] compositor::CompositeError),
    #[error(transparent)]
    Noise(#[from] noisekit::NoiseError),
    #[error(transparent)]
    Splat(#[from] dyngs::SplatError),
    #[error(transparent)]
    Scene(#[from] synthoracle::SceneError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable numeric code for the error class, shared by the CLI, the HTTP
    /// service and the C API.
    pub fn code(&self) -> u32 {
        match self {
            Error::Radiometry(_) => 10,
            Error::Light(_) => 20,
            Error::Env(_) => 30,
            Error::Composite(_) => 40,
            Error::Noise(_) => 50,
            Error::Splat(_) => 60,
            Error::Scene(_) => 65,
            Error::Io { .. } => 70,
            Error::Manifest(_) => 80,
            Error::Json(_) => 81,
        }
    }
}

impl Error {
    /// True when the caller supplied bad parameters, as opposed to a failure
    /// while carrying out a valid request.
    pub fn is_invalid_input(&self) -> bool {
        use compositor::CompositeError as C;
        use dyngs::SplatError as S;
        use envmap::EnvError as E;
        use noisekit::NoiseError as N;
        match self {
            Error::Light(_) | Error::Scene(_) | Error::Manifest(_) | Error::Json(_) => true,
            Error::Composite(e) => matches!(e, C::SizeMismatch { .. } | C::InvalidParam(_) | C::EmptySequence),
            Error::Noise(e) => !matches!(e, N::NonFinite(_)),
            Error::Splat(e) => matches!(e, S::InvalidPlan(_) | S::Misaligned { .. } | S::InvalidSplat(_)),
            Error::Env(E::Image(e)) | Error::Radiometry(e) => bad_image_or_chart(e),
            Error::Env(e) => matches!(
                e,
                E::InvalidFit(_) | E::BadAspect { .. } | E::WeightCount { .. } | E::NegativeRadiance | E::EmptyRegion { .. }
            ),
            Error::Io { .. } => false,
        }
    }
}

/// Malformed image files and bad colour charts; read failures are not.
fn bad_image_or_chart(e: &radiometry::RadiometryError) -> bool {
    !matches!(e, radiometry::RadiometryError::Io { .. })
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
