use ndarray::{Array2, ArrayView2, Axis};
use serde::Serialize;

/// How raw per-row scores map to class scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// One score `s` for class 1 against class 0; class scores are `[-s, s]`.
    Binary,
    /// One score per class.
    OneVsRest,
    /// One logit per class.
    Softmax,
}

/// Optimizer progress of one independent subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RowState {
    pub iterations: usize,
    pub converged: bool,
    /// Lowest epoch loss so far, for loss-plateau stopping.
    pub best_loss: Option<f64>,
    /// Epochs in a row without enough improvement on `best_loss`.
    pub stalled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    /// One row per binary subproblem (or per class for softmax).
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub scoring: Scoring,
    /// One entry per independently optimized subproblem.
    pub rows: Vec<RowState>,
    /// Dual variables per subproblem, for solvers that resume from them.
    #[serde(skip)]
    pub(crate) dual: Vec<Vec<f64>>,
}

impl LinearModel {
    pub fn raw_scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut raw = x.dot(&self.weights.t());
        for mut row in raw.axis_iter_mut(Axis(0)) {
            for (v, b) in row.iter_mut().zip(&self.intercepts) {
                *v += b;
            }
        }
        raw
    }

    pub fn decision_values(&self, x: ArrayView2<f64>) -> Array2<f64> {
        expand_scores(self.raw_scores(x), self.scoring)
    }
}

pub(crate) fn expand_scores(raw: Array2<f64>, scoring: Scoring) -> Array2<f64> {
    match scoring {
        Scoring::Binary => {
            let mut out = Array2::zeros((raw.nrows(), 2));
            for (i, &s) in raw.column(0).iter().enumerate() {
                out[[i, 0]] = -s;
                out[[i, 1]] = s;
            }
            out
        }
        Scoring::OneVsRest | Scoring::Softmax => raw,
    }
}

/// Binary problems train one subproblem (class 1 positive); otherwise one per class.
pub(crate) fn ovr_layout(n_classes: usize) -> (Scoring, Vec<usize>) {
    if n_classes == 2 {
        (Scoring::Binary, vec![1])
    } else {
        (Scoring::OneVsRest, (0..n_classes).collect())
    }
}
