use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is rank deficient: numerical rank {rank}, expected {expected}")]
    Degenerate { rank: usize, expected: usize },

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("solver diverged (non-finite iterate) at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("batch {batch}: {source}")]
    Batch {
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("no frames found in {}", .0.display())]
    NoFrames(PathBuf),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Shape { op, left, right }
    }
}
