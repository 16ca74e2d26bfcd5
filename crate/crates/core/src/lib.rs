//! Zero-intervention classifier search.
//!
//! A labeled table goes in; the crate prepares it, inspects it, prunes a
//! templatized space of classifier sketches, evaluates the survivors with
//! stratified cross-validation and returns the best configuration together
//! with a replayable search trace.
//!
//! The stages map onto modules:
//!
//! | stage                          | module          |
//! |--------------------------------|-----------------|
//! | acquire and split the table    | [`ingest`]      |
//! | impute and standardize         | [`prep`]        |
//! | profile and probe separability | [`inspect`]     |
//! | sketches, holes, static rules  | [`sketchspace`] |
//! | classifier families            | [`learners`]    |
//! | folds and scoring              | [`crossval`]    |
//! | search loop and trace          | [`engine`]      |
//! | end-to-end driver              | [`pipeline`]    |

pub mod crossval;
pub mod engine;
pub mod error;
pub mod ingest;
pub mod inspect;
pub mod learners;
pub mod pipeline;
pub mod prep;
pub mod sketchspace;

pub use crossval::{evaluate_model, stratified_folds, EvalRecord, FoldPlan};
pub use engine::{
    run_search, select_best, Budget, FeatureMask, FeatureSelection, ResultsLedger, SearchOptions,
};
pub use error::{Error, Result};
pub use ingest::{acquire, split_label, Dataset, Format, LabelColumn, RawTable};
pub use inspect::{profile, separability_test, DatasetProfile, Separability};
pub use learners::{predict, train, ClassifierId, ModelSpec, TrainedModel};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
pub use prep::{ImputeParams, Preprocessor, ScalerParams};
pub use sketchspace::{default_space, Assignment, Sketch, SearchSpace, Value};
