use thiserror::Error;

use crate::spaces::Chart;

/// Which part of a singular set was approached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    /// Kepler center with the given index (0 or 1).
    KeplerCenter(usize),
    /// Antipode of a Kepler center on the sphere.
    Antipode(usize),
    /// Horizontal equator of the sphere, where the gnomonic chart and the
    /// spherical Hooke term blow up.
    Equator,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: too close to {kind:?} (distance {distance:e})")]
    Singularity { kind: SingularKind, distance: f64 },

    #[error("chart mismatch: expected {expected:?}, found {found:?}")]
    ChartMismatch { expected: Chart, found: Chart },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
