use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the mapping, planning and simulation pipeline.
#[derive(Debug, Error)]
pub enum IppError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-triangle face at line {line} ({count} vertices)")]
    NonTriangleFace { line: usize, count: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("disconnected facet graph: facet {from} cannot reach facet {to}")]
    Disconnected { from: usize, to: usize },

    #[error("invalid parameter `{field}`: {msg}")]
    InvalidParam { field: &'static str, msg: String },

    #[error("covariance repair failed: minimum eigenvalue {min_eig:e} below tolerance")]
    PsdRepair { min_eig: f64 },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("distance grid of {voxels} voxels exceeds cap of {cap}; increase the voxel size")]
    GridTooLarge { voxels: usize, cap: usize },

    #[error("viewpoint library is empty after filtering")]
    EmptyLibrary,

    #[error("config error: {0}")]
    Config(String),

    #[error("matrix file error: {0}")]
    MatrixFile(String),

    #[error("missing input: {0}")]
    MissingInput(String),
}

impl IppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IppError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(field: &'static str, msg: impl Into<String>) -> Self {
        IppError::InvalidParam {
            field,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = IppError> = std::result::Result<T, E>;
