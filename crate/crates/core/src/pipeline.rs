//! End-to-end driver: prep, inspect, prune, search, select, refit, predict.

use std::time::{Duration, Instant};

use crate::crossval::{stratified_folds, CrossValError, EvalRecord, FoldPlan};
use crate::engine::{
    final_predict, run_search, select_best, select_features, Budget, FeatureMask, FeatureSelection,
    LedgerEntry, ResultsLedger, SearchOptions,
};
use crate::ingest::Dataset;
use crate::inspect::{profile, separability_test, DatasetProfile};
use crate::learners::TrainedModel;
use crate::prep::Preprocessor;
use crate::sketchspace::{default_space, static_prune, SearchSpace, SketchError};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub k: usize,
    pub seed: u64,
    pub budget: Budget,
    pub feature_selection: FeatureSelection,
    /// Apply the class-count and separability rules before searching.
    pub static_rules: bool,
    pub options: SearchOptions,
    /// Defaults to [`default_space`].
    pub space: Option<SearchSpace>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 5,
            seed: 0,
            budget: Budget::default(),
            feature_selection: FeatureSelection::All,
            static_rules: true,
            options: SearchOptions::default(),
            space: None,
        }
    }
}

impl PipelineConfig {
    /// Every rule off: the exhaustive grid.
    pub fn exhaustive(mut self) -> PipelineConfig {
        self.static_rules = false;
        self.options.dynamic_rules = false;
        self
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub profile: DatasetProfile,
    pub plan: FoldPlan,
    pub preprocessor: Preprocessor,
    pub mask: FeatureMask,
    pub initial_size: usize,
    pub post_static_size: usize,
    /// The space after static rules, before the search touched it.
    pub pruned_space: SearchSpace,
    pub ledger: ResultsLedger,
    /// False when the budget stopped the search early.
    pub exhausted: bool,
    pub best_seq: usize,
    pub best: EvalRecord,
    /// Winner refitted on every labeled row.
    pub model: TrainedModel,
    pub predictions: Option<Vec<String>>,
    pub elapsed: Duration,
}

pub fn run_pipeline(
    train: &Dataset,
    test: Option<&Dataset>,
    config: &PipelineConfig,
    on_entry: &mut dyn FnMut(&LedgerEntry),
) -> crate::Result<PipelineOutcome> {
    let started = Instant::now();
    let labels = train.labels().ok_or(CrossValError::Unlabeled)?;
    let preprocessor = Preprocessor::fit(train)?;
    let prepared = preprocessor.apply(train)?;
    let plan = stratified_folds(labels, config.k, config.seed)?;

    let probe = separability_test(&prepared, &plan, config.seed)?;
    let profile = profile(&prepared).with_probe(&probe);
    log::info!(
        "{} rows, {} features, {} classes; probe {:.3} -> {:?}",
        profile.n_instances,
        profile.n_features,
        profile.n_classes,
        probe.probe_accuracy,
        probe.verdict
    );

    let space = config.space.clone().unwrap_or_else(default_space);
    let initial_size = space.size();
    let pruned = if config.static_rules {
        match static_prune(&space, &profile) {
            Ok(p) => p,
            Err(SketchError::WouldEmpty { .. }) => {
                log::warn!("static rules would empty the space; searching it unpruned");
                space.clone()
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        space.clone()
    };
    let post_static_size = pruned.size();

    let mask = select_features(config.feature_selection, &prepared);
    let mut options = config.options;
    options.seed = config.seed;
    // Raw rows: every fold fits its own imputer and scaler.
    let outcome = run_search(&pruned, train, &plan, &mask, config.budget, &options, on_entry)?;
    let (best_seq, best) = select_best(&outcome.ledger)?;
    let best = best.clone();

    let prepared_test = test.map(|t| preprocessor.apply(t)).transpose()?;
    let empty = prepared.select_rows(&[]);
    let (model, predictions) = final_predict(&best, &prepared, prepared_test.as_ref().unwrap_or(&empty))?;
    Ok(PipelineOutcome {
        profile,
        plan,
        preprocessor,
        mask,
        initial_size,
        post_static_size,
        pruned_space: pruned,
        ledger: outcome.ledger,
        exhausted: outcome.exhausted,
        best_seq,
        best,
        model,
        predictions: prepared_test.map(|_| predictions),
        elapsed: started.elapsed(),
    })
}
