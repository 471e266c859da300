use std::path::PathBuf;

use thiserror::Error;

use crate::solution::ReferenceSolution;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("pattern count exceeds ceiling of {ceiling}")]
    CeilingExceeded { ceiling: usize },

    #[error("objective overflow")]
    ObjectiveOverflow,

    #[error("unscaled dual vector: max |x^T alpha| = {max_inner} exceeds lambda = {lambda}")]
    UnscaledDual { max_inner: f64, lambda: f64 },

    #[error("no convergence after {epochs} epochs (best gap {gap:e})")]
    IterationCap {
        epochs: usize,
        gap: f64,
        best: Box<ReferenceSolution>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
