use thiserror::Error;

use crate::crossval::CrossValError;
use crate::engine::SearchError;
use crate::ingest::IngestError;
use crate::learners::LearnError;
use crate::prep::PrepError;
use crate::sketchspace::SketchError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Any failure surfaced by the pipeline, tagged with the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    CrossVal(#[from] CrossValError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Prep(_) => "prep",
            Error::Sketch(_) => "sketchspace",
            Error::Learn(_) => "learners",
            Error::CrossVal(_) => "crossval",
            Error::Search(_) => "engine",
        }
    }

    /// One-line remediation hint for command-line users.
    pub fn hint(&self) -> &'static str {
        match self {
            Error::Ingest(IngestError::NonNumeric { .. }) => {
                "only numeric feature columns are supported; check --label-col"
            }
            Error::Ingest(IngestError::SingleClass { .. }) => {
                "the label column must hold at least two distinct values; check --label-col"
            }
            Error::Ingest(IngestError::Ragged { .. }) => {
                "every row must have the same number of fields"
            }
            Error::Ingest(_) => "check --source, --format and --has-header",
            Error::Prep(_) => "a feature column is entirely missing; drop it from the input",
            Error::Sketch(_) => "check the sketch definition file",
            Error::Learn(_) => "training data and model dimensions disagree",
            Error::CrossVal(_) => "lower --k or supply more labeled rows",
            Error::Search(_) => "raise --budget-seconds or --max-evals",
        }
    }

    /// True for problems with the user's input rather than the search itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Ingest(_) | Error::Prep(_) | Error::Sketch(_) | Error::CrossVal(_)
        )
    }
}
