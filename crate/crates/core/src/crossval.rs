//! Stratified k-fold splitting and cross-validated scoring.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine::FeatureMask;
use crate::ingest::Dataset;
use crate::learners::{predict, train, ClassifierId, LearnError, ModelSpec, TrainedModel};
use crate::prep::Preprocessor;
use crate::sketchspace::Assignment;

#[derive(Debug, Error, PartialEq)]
pub enum CrossValError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("k = {k} exceeds the {n} labeled instances")]
    KTooLarge { k: usize, n: usize },
    #[error("dataset has no labels")]
    Unlabeled,
    #[error("fold plan covers {plan} rows but the dataset has {data}")]
    PlanMismatch { plan: usize, data: usize },
    #[error("feature mask has {mask} entries for {features} features")]
    MaskMismatch { mask: usize, features: usize },
}

type Result<T> = std::result::Result<T, CrossValError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.fold_of.len()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Within each class (in index order) rows are shuffled by `seed`, then dealt
/// to folds round-robin. The dealer does not restart per class, which keeps
/// fold sizes within one of each other as well.
pub fn stratified_folds(y: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(CrossValError::KTooSmall(k));
    }
    if k > y.len() {
        return Err(CrossValError::KTooLarge { k, n: y.len() });
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut fold_of = vec![0; y.len()];
    let mut next = 0;
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            log::warn!("class {class} has {} members, fewer than k = {k}", members.len());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, fold_of, seed })
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Outcome of scoring one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub classifier: ClassifierId,
    pub assignment: Option<Assignment>,
    pub spec: ModelSpec,
    pub mask: FeatureMask,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_fold: Vec<f64>,
    pub wall_time: Duration,
    /// Set when any fold failed to train; accuracies are then zero.
    pub error: Option<String>,
}

impl EvalRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// Called once per fold with the rows and preprocessing that fold used.
pub trait FoldObserver: Sync {
    fn on_fold(&self, fold: usize, train_rows: &[usize], prep: &Preprocessor);
}

/// Cross-validated accuracy of `spec`.
pub fn evaluate_model(
    spec: &ModelSpec,
    data: &Dataset,
    plan: &FoldPlan,
    mask: &FeatureMask,
) -> Result<EvalRecord> {
    Ok(evaluate_with(spec, data, plan, mask, None, None)?.0)
}

/// Like [`evaluate_model`], optionally resuming per-fold `warm` models and
/// reporting each fold to `observer`. Returns the per-fold models as well.
pub fn evaluate_with(
    spec: &ModelSpec,
    data: &Dataset,
    plan: &FoldPlan,
    mask: &FeatureMask,
    warm: Option<&[TrainedModel]>,
    observer: Option<&dyn FoldObserver>,
) -> Result<(EvalRecord, Vec<Option<TrainedModel>>)> {
    data.labels().ok_or(CrossValError::Unlabeled)?;
    if plan.n_rows() != data.n_rows() {
        return Err(CrossValError::PlanMismatch {
            plan: plan.n_rows(),
            data: data.n_rows(),
        });
    }
    if mask.keep.len() != data.n_features() {
        return Err(CrossValError::MaskMismatch {
            mask: mask.keep.len(),
            features: data.n_features(),
        });
    }
    let started = Instant::now();
    let masked = data.select_columns(&mask.keep);
    let n_classes = data.n_classes();

    let folds: Vec<std::result::Result<(f64, TrainedModel), String>> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let train_rows = plan.train_rows(fold);
            let test_rows = plan.test_rows(fold);
            let tr = masked.select_rows(&train_rows);
            let te = masked.select_rows(&test_rows);
            let prep = Preprocessor::fit(&tr).map_err(|e| e.to_string())?;
            if let Some(obs) = observer {
                obs.on_fold(fold, &train_rows, &prep);
            }
            let tr = prep.apply(&tr).map_err(|e| e.to_string())?;
            let te = prep.apply(&te).map_err(|e| e.to_string())?;
            let fold_warm = warm.and_then(|w| w.get(fold));
            let model = fit_resuming(spec, &tr, n_classes, fold_warm).map_err(|e| e.to_string())?;
            let pred = predict(&model, te.features().view()).map_err(|e| e.to_string())?;
            let truth = te.labels().expect("labeled");
            let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
            Ok((hits as f64 / truth.len() as f64, model))
        })
        .collect();

    let error = folds.iter().find_map(|f| f.as_ref().err().cloned());
    let (per_fold, models): (Vec<f64>, Vec<Option<TrainedModel>>) = folds
        .into_iter()
        .map(|f| match f {
            Ok((acc, m)) => (acc, Some(m)),
            Err(_) => (0.0, None),
        })
        .unzip();
    let per_fold = if error.is_some() { vec![0.0; plan.k] } else { per_fold };
    let (mean_accuracy, std_accuracy) = mean_std(&per_fold);
    let record = EvalRecord {
        classifier: spec.classifier(),
        assignment: None,
        spec: spec.clone(),
        mask: mask.clone(),
        mean_accuracy,
        std_accuracy,
        per_fold,
        wall_time: started.elapsed(),
        error,
    };
    Ok((record, models))
}

/// Train `spec`, resuming `warm` for the remaining iteration budget when the
/// two differ only in `max_iter`.
fn fit_resuming(
    spec: &ModelSpec,
    data: &Dataset,
    n_classes: usize,
    warm: Option<&TrainedModel>,
) -> std::result::Result<TrainedModel, LearnError> {
    let x = data.features().view();
    let y = data.labels().expect("labeled");
    if let Some(w) = warm {
        let (target, done) = (spec.params.max_iter(), w.params.max_iter());
        if let (Some(target), Some(done)) = (target, done) {
            if target > done && spec.params.same_except_budget(&w.params) && w.seed == spec.seed {
                return train(&spec.with_max_iter(target - done), x, y, n_classes, Some(w));
            }
        }
    }
    train(spec, x, y, n_classes, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{LogisticParams, LogisticSolver, ModelParams};
    use ndarray::Array2;
    use proptest::prelude::*;
    use std::sync::Mutex;

    fn counts(plan: &FoldPlan, y: &[usize], fold: usize, class: usize) -> usize {
        (0..y.len()).filter(|&i| plan.fold_of[i] == fold && y[i] == class).count()
    }

    #[test]
    fn divisible_classes_split_exactly() {
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        let plan = stratified_folds(&y, 5, 0).unwrap();
        for f in 0..5 {
            assert_eq!(counts(&plan, &y, f, 0), 12);
            assert_eq!(counts(&plan, &y, f, 1), 8);
        }
    }

    #[test]
    fn single_class_round_robin() {
        let y = vec![0; 7];
        let plan = stratified_folds(&y, 3, 0).unwrap();
        let sizes: Vec<usize> = (0..3).map(|f| counts(&plan, &y, f, 0)).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn plan_is_deterministic() {
        let y: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(stratified_folds(&y, 5, 4).unwrap(), stratified_folds(&y, 5, 4).unwrap());
        assert_ne!(stratified_folds(&y, 5, 4).unwrap(), stratified_folds(&y, 5, 5).unwrap());
    }

    #[test]
    fn bad_k() {
        assert_eq!(stratified_folds(&[0, 1], 1, 0), Err(CrossValError::KTooSmall(1)));
        assert_eq!(
            stratified_folds(&[0, 1], 3, 0),
            Err(CrossValError::KTooLarge { k: 3, n: 2 })
        );
    }

    #[test]
    fn population_std() {
        assert_eq!(mean_std(&[0.8; 5]), (0.8, 0.0));
        let (m, s) = mean_std(&[1.0, 0.0]);
        assert_eq!((m, s), (0.5, 0.5));
    }

    fn separable_data() -> Dataset {
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let base = if i % 2 == 0 { -3.0 } else { 3.0 };
            base + 0.01 * (i * (j + 1)) as f64
        });
        Dataset::labeled(x, (0..n).map(|i| i % 2).collect())
    }

    fn lr_spec(max_iter: usize) -> ModelSpec {
        ModelSpec::new(
            ModelParams::LogisticRegression(LogisticParams {
                solver: LogisticSolver::Gradient,
                max_iter,
                tol: 0.0,
                ..Default::default()
            }),
            0,
        )
    }

    #[test]
    fn perfect_classifier_scores_one() {
        let d = separable_data();
        let plan = stratified_folds(d.labels().unwrap(), 5, 0).unwrap();
        let r = evaluate_model(&lr_spec(100), &d, &plan, &FeatureMask::all(2)).unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
        assert_eq!(r.std_accuracy, 0.0);
        assert_eq!(r.per_fold.len(), 5);
    }

    #[test]
    fn warm_evaluation_matches_cold() {
        let d = separable_data();
        let plan = stratified_folds(d.labels().unwrap(), 4, 1).unwrap();
        let mask = FeatureMask::all(2);
        let (_, models) = evaluate_with(&lr_spec(10), &d, &plan, &mask, None, None).unwrap();
        let models: Vec<TrainedModel> = models.into_iter().map(Option::unwrap).collect();
        let (warm, warm_models) = evaluate_with(&lr_spec(100), &d, &plan, &mask, Some(&models), None).unwrap();
        let (cold, cold_models) = evaluate_with(&lr_spec(100), &d, &plan, &mask, None, None).unwrap();
        assert_eq!(warm.per_fold, cold.per_fold);
        assert_eq!(warm_models, cold_models);
    }

    struct Recorder(Mutex<Vec<(usize, Vec<usize>, Preprocessor)>>);

    impl FoldObserver for Recorder {
        fn on_fold(&self, fold: usize, rows: &[usize], prep: &Preprocessor) {
            self.0.lock().unwrap().push((fold, rows.to_vec(), prep.clone()));
        }
    }

    #[test]
    fn observer_sees_every_fold() {
        let d = separable_data();
        let plan = stratified_folds(d.labels().unwrap(), 5, 0).unwrap();
        let rec = Recorder(Mutex::new(Vec::new()));
        evaluate_with(&lr_spec(5), &d, &plan, &FeatureMask::all(2), None, Some(&rec)).unwrap();
        let mut seen = rec.0.into_inner().unwrap();
        seen.sort_by_key(|s| s.0);
        for (fold, rows, prep) in seen {
            assert_eq!(rows, plan.train_rows(fold));
            assert_eq!(prep, Preprocessor::fit(&d.select_rows(&rows)).unwrap());
        }
    }

    #[test]
    fn training_failure_is_recorded() {
        let d = separable_data();
        let plan = stratified_folds(d.labels().unwrap(), 5, 0).unwrap();
        let mut spec = lr_spec(10);
        if let ModelParams::LogisticRegression(p) = &mut spec.params {
            p.solver = LogisticSolver::Newton;
            p.penalty = crate::learners::Penalty::L1;
        }
        let r = evaluate_model(&spec, &d, &plan, &FeatureMask::all(2)).unwrap();
        assert!(!r.succeeded());
        assert_eq!(r.mean_accuracy, 0.0);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            labels in prop::collection::vec(0usize..4, 10..120),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            prop_assume!(k <= labels.len());
            let plan = stratified_folds(&labels, k, seed).unwrap();
            let mut seen = vec![0; labels.len()];
            for f in 0..k {
                prop_assert!(!plan.test_rows(f).is_empty());
                for i in plan.test_rows(f) {
                    seen[i] += 1;
                }
                let train = plan.train_rows(f);
                prop_assert!(plan.test_rows(f).iter().all(|i| !train.contains(i)));
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            for c in 0..4 {
                let per: Vec<usize> = (0..k).map(|f| counts(&plan, &labels, f, c)).collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn stored_stats_match_per_fold(per in prop::collection::vec(0.0f64..1.0, 2..10)) {
            let (m, s) = mean_std(&per);
            let m2 = per.iter().sum::<f64>() / per.len() as f64;
            let s2 = (per.iter().map(|v| (v - m2) * (v - m2)).sum::<f64>() / per.len() as f64).sqrt();
            prop_assert!((m - m2).abs() <= 1e-12 && (s - s2).abs() <= 1e-12);
        }
    }
}
