//! The outer search loop: visit sketches in space order, evaluate their live
//! assignments, prune and reprioritize as results arrive, stop on budget.

pub mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::crossval::{evaluate_with, EvalRecord, FoldPlan};
use crate::ingest::Dataset;
use crate::learners::{predict, train, ClassifierId, TrainedModel};
use crate::sketchspace::{generate, Assignment, HoleKind, RemovalKind, SearchSpace, Value};

pub use trace::{write_trace, TraceLine, TraceSummary};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("budget exhausted before any evaluation")]
    BudgetExhausted,
    #[error("search space is empty")]
    EmptySpace,
    #[error("every evaluation failed; first error: {0}")]
    AllFailed(String),
    #[error("no evaluations recorded")]
    NoRecords,
    #[error("trace: {0}")]
    Trace(String),
}

/// How features are chosen before a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelection {
    #[default]
    All,
    /// Drop features whose variance after scaling is below [`VARIANCE_FLOOR`].
    Variance,
}

impl std::str::FromStr for FeatureSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(FeatureSelection::All),
            "variance" => Ok(FeatureSelection::Variance),
            other => Err(format!("unknown feature selection {other:?} (all|variance)")),
        }
    }
}

pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureMask {
    pub keep: Vec<bool>,
    pub method: FeatureSelection,
}

impl FeatureMask {
    pub fn all(n_features: usize) -> FeatureMask {
        FeatureMask {
            keep: vec![true; n_features],
            method: FeatureSelection::All,
        }
    }

    pub fn n_selected(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Choose features on the (already scaled) training data. A mask that
/// would drop everything falls back to all features.
pub fn select_features(method: FeatureSelection, train: &Dataset) -> FeatureMask {
    let n = train.n_features();
    match method {
        FeatureSelection::All => FeatureMask::all(n),
        FeatureSelection::Variance => {
            let x = train.features();
            let keep: Vec<bool> = x
                .columns()
                .into_iter()
                .map(|c| {
                    let mean = c.sum() / c.len() as f64;
                    c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c.len() as f64 >= VARIANCE_FLOOR
                })
                .collect();
            if keep.iter().any(|&k| k) {
                FeatureMask { keep, method }
            } else {
                log::warn!("variance selection would drop every feature; keeping all");
                FeatureMask::all(n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub wall: Option<Duration>,
    pub max_evals: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            wall: Some(Duration::from_secs(600)),
            max_evals: None,
        }
    }
}

impl Budget {
    pub fn unlimited() -> Budget {
        Budget {
            wall: None,
            max_evals: None,
        }
    }

    pub fn evals(n: usize) -> Budget {
        Budget {
            wall: None,
            max_evals: Some(n),
        }
    }

    fn tripped(&self, started: Instant, evals: usize) -> bool {
        self.max_evals.is_some_and(|m| evals >= m) || self.wall.is_some_and(|w| started.elapsed() >= w)
    }
}

pub const MONOTONE_EPSILON: f64 = 0.005;
pub const DEMOTION_MARGIN: f64 = 0.15;
pub const RULE_BUDGET: &str = "budget";
pub const RULE_REPRIORITIZE: &str = "reprioritize";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Monotone pruning and cross-model demotion.
    pub dynamic_rules: bool,
    pub warm_start: bool,
    pub epsilon: f64,
    pub margin: f64,
    /// Seed handed to every generated model.
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            dynamic_rules: true,
            warm_start: true,
            epsilon: MONOTONE_EPSILON,
            margin: DEMOTION_MARGIN,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LedgerEntry {
    Eval { seq: usize, record: EvalRecord },
    Skip { seq: usize, assignment: Assignment, rule: String },
}

impl LedgerEntry {
    pub fn seq(&self) -> usize {
        match self {
            LedgerEntry::Eval { seq, .. } | LedgerEntry::Skip { seq, .. } => *seq,
        }
    }
}

/// Append-only log of evaluations and rule-justified skips.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsLedger {
    entries: Vec<LedgerEntry>,
}

impl ResultsLedger {
    pub fn new() -> ResultsLedger {
        ResultsLedger::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn push_eval(&mut self, record: EvalRecord) -> &LedgerEntry {
        let seq = self.entries.len();
        self.entries.push(LedgerEntry::Eval { seq, record });
        self.entries.last().expect("just pushed")
    }

    pub fn push_skip(&mut self, assignment: Assignment, rule: &str) -> &LedgerEntry {
        let seq = self.entries.len();
        self.entries.push(LedgerEntry::Skip {
            seq,
            assignment,
            rule: rule.to_string(),
        });
        self.entries.last().expect("just pushed")
    }

    /// Evaluations with their sequence numbers.
    pub fn records(&self) -> impl Iterator<Item = (usize, &EvalRecord)> {
        self.entries.iter().filter_map(|e| match e {
            LedgerEntry::Eval { seq, record } => Some((*seq, record)),
            _ => None,
        })
    }

    pub fn skips(&self) -> impl Iterator<Item = (&Assignment, &str)> {
        self.entries.iter().filter_map(|e| match e {
            LedgerEntry::Skip { assignment, rule, .. } => Some((assignment, rule.as_str())),
            _ => None,
        })
    }

    pub fn n_evals(&self) -> usize {
        self.records().count()
    }

    pub fn n_skips(&self) -> usize {
        self.skips().count()
    }

    /// Visited (evaluated) assignments in order.
    pub fn visited(&self) -> Vec<&Assignment> {
        self.records().filter_map(|(_, r)| r.assignment.as_ref()).collect()
    }
}

/// Ledger plus the space as it stood when the search ended.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub ledger: ResultsLedger,
    pub space: SearchSpace,
    /// False when the budget stopped the search early.
    pub exhausted: bool,
}

/// Apply the monotone rule around the newest record. Returns the skipped
/// assignments with their rule names.
pub fn dynamic_prune(
    ledger: &ResultsLedger,
    space: &mut SearchSpace,
    epsilon: f64,
) -> Vec<(Assignment, String)> {
    let Some((_, latest)) = ledger.records().last() else {
        return Vec::new();
    };
    let Some(a) = latest.assignment.clone() else {
        return Vec::new();
    };
    let Some(sketch) = space.sketch(a.sketch).cloned() else {
        return Vec::new();
    };
    let scores: BTreeMap<&Assignment, f64> = ledger
        .records()
        .filter(|(_, r)| r.succeeded())
        .filter_map(|(_, r)| r.assignment.as_ref().map(|x| (x, r.mean_accuracy)))
        .collect();

    let evaluated: BTreeSet<&Assignment> = ledger.visited().into_iter().collect();
    let mut out = Vec::new();
    for hole in sketch.holes.iter().filter(|h| h.kind == HoleKind::OrderedNumeric) {
        let Some(value) = a.get(&hole.name) else { continue };
        let Some(idx) = hole.position(value) else { continue };
        let with = |v: &Value| Assignment {
            sketch: a.sketch,
            values: a
                .values
                .iter()
                .map(|(h, x)| (h.clone(), if *h == hole.name { v.clone() } else { x.clone() }))
                .collect(),
        };
        // Pairs (lower, upper) of consecutive candidates touching the newest record.
        let mut pairs = Vec::new();
        if idx > 0 {
            pairs.push((idx - 1, idx));
        }
        if idx + 1 < hole.candidates.len() {
            pairs.push((idx, idx + 1));
        }
        for (lo, hi) in pairs {
            let (Some(&acc_lo), Some(&acc_hi)) = (
                scores.get(&with(&hole.candidates[lo])),
                scores.get(&with(&hole.candidates[hi])),
            ) else {
                continue;
            };
            if acc_hi > acc_lo + epsilon {
                continue;
            }
            let victims: Vec<Assignment> = space
                .live(a.sketch)
                .into_iter()
                .filter(|b| b.siblings_except(&a, &hole.name))
                .filter(|b| b.get(&hole.name).and_then(|v| hole.position(v)).is_some_and(|p| p > hi))
                .filter(|b| !evaluated.contains(b))
                .collect();
            let rule = format!("monotone:{}", hole.name);
            let detail = format!("{} ≤ {}+ε at {}={}", acc_hi, acc_lo, hole.name, hole.candidates[hi]);
            for v in space.exclude(&rule, detail, &victims) {
                out.push((v, rule.clone()));
            }
        }
    }
    out
}

fn is_linear_record(r: &EvalRecord) -> bool {
    r.classifier.is_linear_family()
        || (r.classifier == ClassifierId::KernelSvm
            && r.assignment.as_ref().and_then(|a| a.get("kernel")) == Some(&Value::text("linear")))
}

fn is_nonlinear_record(r: &EvalRecord) -> bool {
    r.classifier == ClassifierId::KernelSvm && !is_linear_record(r)
}

/// Demote linear-family sketches not yet visited when the best linear result
/// trails the best non-linear one by more than `margin`. Returns whether the
/// order changed.
pub fn reprioritize(
    ledger: &ResultsLedger,
    space: &mut SearchSpace,
    done: &BTreeSet<ClassifierId>,
    margin: f64,
) -> bool {
    let best = |pred: fn(&EvalRecord) -> bool| {
        ledger
            .records()
            .filter(|(_, r)| r.succeeded() && pred(r))
            .map(|(_, r)| r.mean_accuracy)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let (Some(linear), Some(nonlinear)) = (best(is_linear_record), best(is_nonlinear_record)) else {
        return false;
    };
    if nonlinear - linear <= margin {
        return false;
    }
    let demote: Vec<ClassifierId> = space
        .order()
        .into_iter()
        .filter(|id| id.is_linear_family() && !done.contains(id))
        .collect();
    let before = space.removal_log().len();
    space.demote(RULE_REPRIORITIZE, &demote);
    space.removal_log().len() > before
}

/// Run the search over `space`. Static removals already in the space's log
/// are recorded as skips first. `on_entry` sees every ledger entry as it is
/// appended.
pub fn run_search(
    space: &SearchSpace,
    train_set: &Dataset,
    plan: &FoldPlan,
    mask: &FeatureMask,
    budget: Budget,
    options: &SearchOptions,
    on_entry: &mut dyn FnMut(&LedgerEntry),
) -> crate::Result<SearchOutcome> {
    let started = Instant::now();
    let mut space = space.clone();
    let mut ledger = ResultsLedger::new();
    for removal in space.removal_log().to_vec() {
        if removal.kind == RemovalKind::Removed {
            for a in removal.removed {
                on_entry(ledger.push_skip(a, &removal.rule));
            }
        }
    }
    if space.size() == 0 {
        return Err(SearchError::EmptySpace.into());
    }

    let mut done: BTreeSet<ClassifierId> = BTreeSet::new();
    let mut visited: BTreeSet<Assignment> = BTreeSet::new();
    let mut exhausted = true;
    'sketches: while let Some(id) = space.order().into_iter().find(|id| !done.contains(id)) {
        let mut previous: Option<(Assignment, Vec<TrainedModel>)> = None;
        while let Some(a) = space.live(id).into_iter().find(|a| !visited.contains(a)) {
            if budget.tripped(started, ledger.n_evals()) {
                exhausted = false;
                break 'sketches;
            }
            let spec = generate(&a, options.seed)?;
            let warm = previous.as_ref().and_then(|(prev, models)| {
                let prev_spec = generate(prev, options.seed).ok()?;
                let grows = spec.params.max_iter()? > prev_spec.params.max_iter()?;
                (options.warm_start && grows && spec.params.same_except_budget(&prev_spec.params))
                    .then_some(models.as_slice())
            });
            let (mut record, models) = evaluate_with(&spec, train_set, plan, mask, warm, None)?;
            record.assignment = Some(a.clone());
            visited.insert(a.clone());
            log::debug!("{a}: {:.4} ± {:.4}", record.mean_accuracy, record.std_accuracy);
            let succeeded = record.succeeded();
            on_entry(ledger.push_eval(record));
            previous = if succeeded && spec.params.max_iter().is_some() {
                Some((a, models.into_iter().map(|m| m.expect("successful fold")).collect()))
            } else {
                None
            };
            if options.dynamic_rules {
                for (skipped, rule) in dynamic_prune(&ledger, &mut space, options.epsilon) {
                    on_entry(ledger.push_skip(skipped, &rule));
                }
            }
        }
        done.insert(id);
        if options.dynamic_rules {
            reprioritize(&ledger, &mut space, &done, options.margin);
        }
    }

    if !exhausted {
        for a in space.enumerate() {
            if !visited.contains(&a) {
                on_entry(ledger.push_skip(a, RULE_BUDGET));
            }
        }
        if ledger.n_evals() == 0 {
            return Err(SearchError::BudgetExhausted.into());
        }
    }
    Ok(SearchOutcome {
        ledger,
        space,
        exhausted,
    })
}

/// Highest mean accuracy, then lowest std, then earliest evaluation.
pub fn select_best(ledger: &ResultsLedger) -> Result<(usize, &EvalRecord), SearchError> {
    let mut best: Option<(usize, &EvalRecord)> = None;
    let mut first_error = None;
    for (seq, r) in ledger.records() {
        if !r.succeeded() {
            first_error.get_or_insert_with(|| r.error.clone().unwrap_or_default());
            continue;
        }
        let better = match best {
            None => true,
            Some((bseq, b)) => {
                (r.mean_accuracy, -r.std_accuracy, std::cmp::Reverse(seq))
                    > (b.mean_accuracy, -b.std_accuracy, std::cmp::Reverse(bseq))
            }
        };
        if better {
            best = Some((seq, r));
        }
    }
    match (best, first_error) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(SearchError::AllFailed(e)),
        (None, None) => Err(SearchError::NoRecords),
    }
}

/// Refit the winning spec on all labeled rows and label `test`.
/// Both datasets must already be preprocessed with the same parameters.
pub fn final_predict(
    best: &EvalRecord,
    train_set: &Dataset,
    test: &Dataset,
) -> crate::Result<(TrainedModel, Vec<String>)> {
    let tr = train_set.select_columns(&best.mask.keep);
    let y = tr.labels().ok_or(crate::crossval::CrossValError::Unlabeled)?;
    let model = train(&best.spec, tr.features().view(), y, train_set.n_classes(), None)?;
    if test.n_rows() == 0 {
        return Ok((model, Vec::new()));
    }
    let te = test.select_columns(&best.mask.keep);
    let labels = predict(&model, te.features().view())?;
    Ok((model, train_set.decode(&labels)))
}
