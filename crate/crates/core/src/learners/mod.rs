//! The four classifier families a sketch can instantiate.
//!
//! All training is deterministic in `(spec, X, y, warm)`. Iterative families
//! keep their optimizer progress inside [`TrainedModel`], so a model trained
//! for `a` iterations and resumed for `b` more is bit-identical to one trained
//! for `a + b` iterations from scratch.
//!
//! Linear families minimize `(1/C)·regularizer + mean loss`. The kernel SVM
//! solves the usual dual with box constraint `0 ≤ α ≤ C`.

pub mod kernel;
mod linear;
pub mod linear_svm;
pub mod logistic;
pub mod perceptron;
pub mod smo;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kernel::{Kernel, KernelKind};
pub use linear::{LinearModel, RowState, Scoring};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("{rows} rows but {labels} labels")]
    RowLabelMismatch { rows: usize, labels: usize },
    #[error("cannot train on an empty dataset")]
    Empty,
    #[error("model expects {expected} features, got {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("warm start rejected: {0}")]
    WarmIncompatible(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

type Result<T> = std::result::Result<T, LearnError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierId {
    Perceptron,
    LogisticRegression,
    LinearSvm,
    KernelSvm,
}

impl ClassifierId {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierId::Perceptron => "perceptron",
            ClassifierId::LogisticRegression => "logistic_regression",
            ClassifierId::LinearSvm => "linear_svm",
            ClassifierId::KernelSvm => "kernel_svm",
        }
    }

    /// Families whose every configuration is a linear decision rule and that
    /// the cross-model reprioritization may demote.
    pub fn is_linear_family(self) -> bool {
        matches!(self, ClassifierId::Perceptron | ClassifierId::LinearSvm)
    }
}

impl std::fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    None,
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptronParams {
    pub penalty: Penalty,
    pub alpha: f64,
    pub max_iter: usize,
    pub eta0: f64,
    pub shuffle: bool,
    /// Stop once the epoch loss has failed to beat the best by `tol·n` for
    /// [`perceptron::NO_CHANGE_EPOCHS`] epochs running. `None` trains until
    /// an error-free epoch or the budget.
    pub tol: Option<f64>,
}

impl Default for PerceptronParams {
    fn default() -> Self {
        PerceptronParams {
            penalty: Penalty::None,
            alpha: 1e-4,
            max_iter: 1000,
            eta0: 1.0,
            shuffle: true,
            tol: Some(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticSolver {
    /// Full-batch proximal gradient with a fixed `1/L` step.
    Gradient,
    /// Damped Newton with backtracking; l2 or no penalty only.
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiClass {
    Ovr,
    Multinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub solver: LogisticSolver,
    pub penalty: Penalty,
    pub c: f64,
    pub max_iter: usize,
    pub multi_class: MultiClass,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            solver: LogisticSolver::Newton,
            penalty: Penalty::L2,
            c: 1.0,
            max_iter: 100,
            multi_class: MultiClass::Multinomial,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmLoss {
    Hinge,
    SquaredHinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmParams {
    pub c: f64,
    pub loss: SvmLoss,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        LinearSvmParams {
            c: 1.0,
            loss: SvmLoss::SquaredHinge,
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSvmParams {
    pub kernel: KernelKind,
    pub c: f64,
    pub degree: u32,
    /// Stop when the maximal KKT violation falls below this.
    pub tol: f64,
    /// SMO iteration cap; reaching it is flagged on the model.
    pub max_iter: usize,
}

impl Default for KernelSvmParams {
    fn default() -> Self {
        KernelSvmParams {
            kernel: KernelKind::Rbf,
            c: 1.0,
            degree: 3,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "classifier", rename_all = "snake_case")]
pub enum ModelParams {
    Perceptron(PerceptronParams),
    LogisticRegression(LogisticParams),
    LinearSvm(LinearSvmParams),
    KernelSvm(KernelSvmParams),
}

impl ModelParams {
    pub fn classifier(&self) -> ClassifierId {
        match self {
            ModelParams::Perceptron(_) => ClassifierId::Perceptron,
            ModelParams::LogisticRegression(_) => ClassifierId::LogisticRegression,
            ModelParams::LinearSvm(_) => ClassifierId::LinearSvm,
            ModelParams::KernelSvm(_) => ClassifierId::KernelSvm,
        }
    }

    /// Iteration budget for families that have one.
    pub fn max_iter(&self) -> Option<usize> {
        match self {
            ModelParams::Perceptron(p) => Some(p.max_iter),
            ModelParams::LogisticRegression(p) => Some(p.max_iter),
            ModelParams::LinearSvm(p) => Some(p.max_iter),
            ModelParams::KernelSvm(_) => None,
        }
    }

    pub fn with_max_iter(mut self, n: usize) -> ModelParams {
        match &mut self {
            ModelParams::Perceptron(p) => p.max_iter = n,
            ModelParams::LogisticRegression(p) => p.max_iter = n,
            ModelParams::LinearSvm(p) => p.max_iter = n,
            ModelParams::KernelSvm(_) => {}
        }
        self
    }

    /// True when `self` and `other` differ at most in the iteration budget.
    pub fn same_except_budget(&self, other: &ModelParams) -> bool {
        self.max_iter().is_some() && self.with_max_iter(0) == other.with_max_iter(0)
    }
}

/// A fully specified, trainable configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(params: ModelParams, seed: u64) -> ModelSpec {
        ModelSpec { params, seed }
    }

    pub fn classifier(&self) -> ClassifierId {
        self.params.classifier()
    }

    /// Same configuration with a different iteration budget.
    pub fn with_max_iter(&self, n: usize) -> ModelSpec {
        ModelSpec {
            params: self.params.with_max_iter(n),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelModel {
    pub kernel: Kernel,
    /// Training-row indices of the support vectors (union over machines).
    pub support: Vec<usize>,
    pub support_vectors: Array2<f64>,
    /// `α_i·y_i` per binary machine, aligned with `support`.
    pub dual_coef: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub scoring: Scoring,
    /// Final maximal KKT violation per machine.
    pub kkt_violation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelState {
    Linear(LinearModel),
    Kernel(KernelModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub classifier: ClassifierId,
    pub params: ModelParams,
    pub seed: u64,
    pub n_classes: usize,
    pub n_features: usize,
    pub n_samples: usize,
    pub state: ModelState,
    pub iterations_run: usize,
    pub converged: bool,
    pub hit_iteration_cap: bool,
    pub final_objective: f64,
}

/// Version tag of [`TrainedModel::to_json`] documents.
pub const MODEL_DOC_VERSION: u32 = 1;

impl TrainedModel {
    /// Versioned JSON document: classifier, hyperparameters, flattened coefficients.
    pub fn to_json(&self) -> serde_json::Value {
        let (coefficients, intercepts, extra) = match &self.state {
            ModelState::Linear(m) => (
                m.weights.iter().copied().collect::<Vec<_>>(),
                m.intercepts.clone(),
                serde_json::json!({ "shape": [m.weights.nrows(), m.weights.ncols()] }),
            ),
            ModelState::Kernel(m) => (
                m.dual_coef.iter().copied().collect(),
                m.intercepts.clone(),
                serde_json::json!({
                    "shape": [m.dual_coef.nrows(), m.dual_coef.ncols()],
                    "kernel": m.kernel,
                    "support": m.support,
                    "support_vectors": m.support_vectors.iter().copied().collect::<Vec<_>>(),
                }),
            ),
        };
        serde_json::json!({
            "version": MODEL_DOC_VERSION,
            "classifier_id": self.classifier,
            "hyperparameters": self.params,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "coefficients": coefficients,
            "intercepts": intercepts,
            "layout": extra,
            "iterations_run": self.iterations_run,
            "converged": self.converged,
        })
    }
}

/// Binary targets `±1` for "class `positive` vs the rest".
pub(crate) fn signed_targets(y: &[usize], positive: usize) -> Vec<f64> {
    y.iter()
        .map(|&c| if c == positive { 1.0 } else { -1.0 })
        .collect()
}

/// Fit `spec` on `(x, y)`. With `warm`, resume the warm model's optimizer
/// for `spec`'s iteration budget more iterations.
pub fn train(
    spec: &ModelSpec,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    warm: Option<&TrainedModel>,
) -> Result<TrainedModel> {
    if x.nrows() != y.len() {
        return Err(LearnError::RowLabelMismatch {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(LearnError::Empty);
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(LearnError::LabelOutOfRange { label, n_classes });
    }
    if n_classes < 2 {
        return Err(LearnError::Unsupported("fewer than two classes".into()));
    }
    if let Some(w) = warm {
        check_warm(spec, w, x.ncols(), x.nrows(), n_classes)?;
    }
    let warm_state = warm.map(|w| match &w.state {
        ModelState::Linear(m) => m,
        ModelState::Kernel(_) => unreachable!("kernel models are rejected by check_warm"),
    });

    let (state, objective, cap) = match &spec.params {
        ModelParams::Perceptron(p) => {
            let m = perceptron::fit(p, spec.seed, x, y, n_classes, warm_state);
            let obj = perceptron::objective(&m, x, y);
            (ModelState::Linear(m), obj, false)
        }
        ModelParams::LogisticRegression(p) => {
            let (m, obj) = logistic::fit(p, x, y, n_classes, warm_state)?;
            (ModelState::Linear(m), obj, false)
        }
        ModelParams::LinearSvm(p) => {
            let (m, obj) = linear_svm::fit(p, spec.seed, x, y, n_classes, warm_state);
            (ModelState::Linear(m), obj, false)
        }
        ModelParams::KernelSvm(p) => {
            let (m, obj, cap) = smo::fit(p, x, y, n_classes);
            (ModelState::Kernel(m), obj, cap)
        }
    };
    let (iterations_run, converged) = match &state {
        ModelState::Linear(m) => (
            m.rows.iter().map(|r| r.iterations).max().unwrap_or(0),
            m.rows.iter().all(|r| r.converged),
        ),
        ModelState::Kernel(m) => (0, m.kkt_violation.iter().all(|&v| v < kernel_tol(spec))),
    };
    Ok(TrainedModel {
        classifier: spec.classifier(),
        params: match warm {
            // Record the cumulative budget so the model describes itself.
            Some(w) => spec
                .params
                .with_max_iter(w.params.max_iter().unwrap_or(0) + spec.params.max_iter().unwrap_or(0)),
            None => spec.params,
        },
        seed: spec.seed,
        n_classes,
        n_features: x.ncols(),
        n_samples: x.nrows(),
        state,
        iterations_run,
        converged,
        hit_iteration_cap: cap,
        final_objective: objective,
    })
}

fn kernel_tol(spec: &ModelSpec) -> f64 {
    match spec.params {
        ModelParams::KernelSvm(p) => p.tol,
        _ => 0.0,
    }
}

fn check_warm(
    spec: &ModelSpec,
    warm: &TrainedModel,
    n_features: usize,
    n_samples: usize,
    n_classes: usize,
) -> Result<()> {
    let reject = |why: &str| Err(LearnError::WarmIncompatible(why.to_string()));
    if warm.classifier != spec.classifier() {
        return reject("different classifier");
    }
    if spec.params.max_iter().is_none() {
        return reject("classifier has no iteration budget");
    }
    if !spec.params.same_except_budget(&warm.params) {
        return reject("hyperparameters other than max_iter differ");
    }
    if warm.seed != spec.seed {
        return reject("different seed");
    }
    if warm.n_features != n_features || warm.n_classes != n_classes || warm.n_samples != n_samples {
        return reject("data dimensions differ");
    }
    Ok(())
}

/// Per-class scores, one row per instance.
pub fn decision_values(model: &TrainedModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.n_features {
        return Err(LearnError::FeatureMismatch {
            expected: model.n_features,
            found: x.ncols(),
        });
    }
    Ok(match &model.state {
        ModelState::Linear(m) => m.decision_values(x),
        ModelState::Kernel(m) => {
            let k = m.kernel.cross(x, m.support_vectors.view());
            let mut raw = k.dot(&m.dual_coef.t());
            for mut row in raw.axis_iter_mut(Axis(0)) {
                for (v, b) in row.iter_mut().zip(&m.intercepts) {
                    *v += b;
                }
            }
            linear::expand_scores(raw, m.scoring)
        }
    })
}

/// Argmax over class scores; ties go to the lowest class index.
pub fn predict(model: &TrainedModel, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(&decision_values(model, x)?))
}

pub(crate) fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
