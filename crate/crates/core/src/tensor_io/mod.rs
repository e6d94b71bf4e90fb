//! Array files and JSON documents.

mod npy;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use npy::{read_npy, read_npy_from, write_npy, write_npy_to, ArrayData, ArrayFile, Dtype};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("BadMagic: not an NPY file")]
    BadMagic,
    #[error("UnsupportedVersion: NPY version {0}.{1}, only 1.0 is supported")]
    UnsupportedVersion(u8, u8),
    #[error("UnsupportedDtype: '{0}', expected '<f4' or '<f8'")]
    UnsupportedDtype(String),
    #[error("FortranOrderUnsupported: only C-order arrays are supported")]
    FortranOrderUnsupported,
    #[error("UnsupportedShape: {0:?}, expected 1 to 3 axes")]
    UnsupportedShape(Vec<usize>),
    #[error("ShapeMismatch: shape {shape:?} does not hold {elements} elements")]
    ShapeMismatch { shape: Vec<usize>, elements: usize },
    #[error("TruncatedPayload: expected {expected} payload bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("MalformedHeader: {0}")]
    MalformedHeader(String),
    #[error("MalformedJson: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    WithPath {
        path: PathBuf,
        #[source]
        source: Box<IoError>,
    },
}

impl IoError {
    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            e @ IoError::WithPath { .. } => e,
            e => IoError::WithPath {
                path: path.to_path_buf(),
                source: Box::new(e),
            },
        }
    }

    /// The error with any path context stripped.
    pub fn root(&self) -> &IoError {
        match self {
            IoError::WithPath { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for operating-system failures (missing files, permissions, ...)
    /// as opposed to malformed content.
    pub fn is_os_failure(&self) -> bool {
        matches!(self.root(), IoError::Io(_))
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

/// Frame structure of a flattened `(frames · tokens) × dim` feature array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub dim: usize,
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let path = path.as_ref();
    let run = || -> Result<Sidecar> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    };
    run().map_err(|e| e.with_path(path))
}

pub fn write_sidecar(path: impl AsRef<Path>, sidecar: &Sidecar) -> Result<()> {
    write_report(path, sidecar)
}

/// Compact JSON with object keys sorted and floats in shortest round-trip form.
pub fn report_to_string<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    // `Value` objects are BTreeMap-backed, which sorts keys on the way through.
    let value = serde_json::to_value(report)?;
    Ok(serde_json::to_string(&value)?)
}

pub fn write_report<T: Serialize + ?Sized>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let path = path.as_ref();
    let run = || -> Result<()> {
        let text = report_to_string(report)?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    };
    run().map_err(|e| e.with_path(path))
}
