use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants split into two families: validation problems (bad input,
/// inconsistent data, impossible requests) and numerical failures (non-finite
/// values, optimisers that fail to converge). [`Error::is_numerical`] tells
/// them apart so callers can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("record has zero episodes")]
    EmptyRecord,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dataset record {index}: {message}")]
    DatasetRecord { index: usize, message: String },

    #[error("filter `{filter}` selects no pipelines")]
    EmptyFilter { filter: String },

    #[error("maze generation exhausted {attempts} attempts without a connected layout")]
    MazeRejection { attempts: usize },

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("unknown competitor: {0}")]
    UnknownCompetitor(String),

    #[error("goal `{0}` has a degenerate saliency direction (zero norm)")]
    DegenerateGoal(String),

    #[error("non-finite latent weights in stage {stage}, step {step}")]
    NonFiniteLatent { stage: usize, step: usize },

    #[error("non-finite policy weights after stage {stage}, episode {episode}")]
    NonFinitePolicy { stage: usize, episode: usize },

    #[error("non-finite loss or gradient in epoch {epoch}, batch {batch} (loss {loss}, grad norm {grad_norm})")]
    NonFiniteFit {
        epoch: usize,
        batch: usize,
        loss: f64,
        grad_norm: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        grad_norm: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteLatent { .. }
                | Error::NonFinitePolicy { .. }
                | Error::NonFiniteFit { .. }
                | Error::NoConvergence { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
