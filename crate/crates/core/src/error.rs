use std::fmt;

use thiserror::Error;

/// Pipeline stage an error was raised in, used to label propagated failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encode,
    Flow,
    Surrogate,
    Reconstruct,
    Evaluate,
    Oracle,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Encode => "encode",
            Stage::Flow => "flow",
            Stage::Surrogate => "surrogate flow",
            Stage::Reconstruct => "reconstruct",
            Stage::Evaluate => "evaluate",
            Stage::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration produced a non-finite state at t = {time}")]
    IntegrationFailure { time: f64 },

    #[error("batch element {index} failed: {source}")]
    BatchElement {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("characteristic inversion failed at q = {target:?} (t = {time}): no multistart seed converged")]
    InversionFailure { target: Vec<f64>, time: f64 },

    #[error("t = {time} is past the estimated classical horizon (min Jacobian determinant {min_det:.3e})")]
    PastClassicalHorizon { time: f64, min_det: f64 },

    #[error("insufficient MLS stencil at q = {query:?}: {found} points with positive weight, {needed} needed")]
    InsufficientStencil {
        query: Vec<f64>,
        found: usize,
        needed: usize,
    },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("point set needs at least 2 points, has {0}")]
    TooFewPoints(usize),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingFailure { epoch: usize },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("{row}: {source}")]
    RowFailure {
        row: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_index(self, index: usize) -> Error {
        Error::BatchElement {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
