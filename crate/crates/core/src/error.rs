use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain length {n_sites}: must be even and within [2, {max}]")]
    InvalidSiteCount { n_sites: usize, max: usize },

    #[error("invalid block {start}..={end} for a chain of {n_sites} sites")]
    InvalidBlock {
        start: usize,
        end: usize,
        n_sites: usize,
    },

    #[error("unsupported block of {0} sites (only 1 or 2 sites are supported)")]
    UnsupportedBlock(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("dimension {0} too large for dense diagonalization")]
    TooLargeForDense(usize),

    #[error("Krylov propagation broke down: {0}")]
    KrylovBreakdown(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("{0}")]
    Numerical(String),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing series `{0}` in bundle")]
    MissingSeries(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
