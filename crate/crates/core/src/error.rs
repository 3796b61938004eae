use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the modal force pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty organ mask")]
    EmptyMask,

    #[error("empty region of interest")]
    EmptyRoi,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("selected bin {bin} has zero energy inside the region of interest")]
    ZeroEnergyBin { bin: usize },

    #[error("K = {requested} exceeds the {available} available frequency bins")]
    BandTooWide { requested: usize, available: usize },

    #[error("degenerate signal: {0}")]
    DegenerateSignal(&'static str),

    #[error("rotation is not orthonormal (|R^T R - I| = {0:.3e})")]
    NonOrthonormalRotation(f64),

    #[error(
        "unstable integration: displacement {magnitude:.3e} exceeds {limit:.1e} at t = {time:.4} s; \
         reduce the integrator dt"
    )]
    Unstable { magnitude: f64, limit: f64, time: f64 },

    #[error("bad magic in {path}: expected {expected:?}, found {found:?}")]
    BadMagic {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
