use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix data has length {len}, expected {rows}x{cols}")]
    Length {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("empty matrix passed to {0}")]
    Empty(&'static str),

    #[error("svd did not converge on a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("objective became non-finite at outer iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{what} id {id} outside dimension {bound}")]
    Bounds {
        what: &'static str,
        id: u64,
        bound: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Broad category of an error, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape { .. }
            | Error::Length { .. }
            | Error::Empty(_)
            | Error::Bounds { .. }
            | Error::Invalid(_) => ErrorKind::Validation,
            Error::Parse { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::NonFinite { .. } | Error::SvdNoConvergence { .. } | Error::Divergence { .. } => {
                ErrorKind::Numerical
            }
            Error::Fold { source, .. } => source.kind(),
        }
    }
}
