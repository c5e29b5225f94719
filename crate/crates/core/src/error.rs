use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported polynomial degree {0}; supported degrees are 1 and 2")]
    UnsupportedDegree(usize),

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("vertex index out of range: cell {cell} references vertex {index} but the mesh has {nv} vertices")]
    VertexIndexOutOfRange { cell: usize, index: usize, nv: usize },

    #[error("cell {cell} has non-positive signed area {area:e}")]
    NonPositiveArea { cell: usize, area: f64 },

    #[error("non-conforming mesh: edge ({0}, {1}) is shared by more than two cells")]
    NonConforming(usize, usize),

    #[error("could not build a valid perturbed mesh after {0} retries")]
    PerturbationFailed(usize),

    #[error("coefficient vector does not belong to this space: expected {expected} dofs, got {got}")]
    SpaceMismatch { expected: usize, got: usize },

    #[error("degree mismatch between velocity space (k={velocity}) and multiplier space (k={multiplier})")]
    DegreeMismatch { velocity: usize, multiplier: usize },

    #[error("factorization failed at pivot {pivot}")]
    Factorization { pivot: usize },

    #[error("linear solve produced non-finite values")]
    NonFinite,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
