//! Mistake-driven perceptron, one-vs-rest for more than two classes.
//!
//! Every sample visit applies the penalty (`l2` shrinks, `l1` soft-thresholds
//! by `eta0·alpha`); misclassified samples then move the weights by
//! `eta0·y·x`. A row stops after an epoch without mistakes, or once the
//! summed epoch loss `max(0, −y·f)` stops improving (see `tol`).

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linear::{ovr_layout, LinearModel, RowState};
use super::{signed_targets, Penalty, PerceptronParams};

pub const NO_CHANGE_EPOCHS: usize = 5;

/// Epoch order depends only on `(seed, row, epoch)` so resumed runs replay
/// the exact sequence a cold run would.
fn epoch_order(n: usize, shuffle: bool, seed: u64, row: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((row as u64) << 32) | epoch as u64);
        order.shuffle(&mut rng);
    }
    order
}

fn apply_penalty(w: &mut Array1<f64>, penalty: Penalty, amount: f64) {
    match penalty {
        Penalty::None => {}
        Penalty::L2 => w.mapv_inplace(|v| v * (1.0 - amount).max(0.0)),
        Penalty::L1 => w.mapv_inplace(|v| v.signum() * (v.abs() - amount).max(0.0)),
    }
}

pub(crate) fn fit(
    p: &PerceptronParams,
    seed: u64,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    warm: Option<&LinearModel>,
) -> LinearModel {
    let (n, d) = x.dim();
    let (scoring, positives) = ovr_layout(n_classes);
    let mut weights = Array2::zeros((positives.len(), d));
    let mut intercepts = vec![0.0; positives.len()];
    let mut rows = vec![RowState::default(); positives.len()];
    if let Some(w) = warm {
        weights.assign(&w.weights);
        intercepts.clone_from(&w.intercepts);
        rows.clone_from(&w.rows);
    }
    let shrink = p.eta0 * p.alpha;

    for (r, &pos) in positives.iter().enumerate() {
        let t = signed_targets(y, pos);
        let mut w = weights.row(r).to_owned();
        let mut b = intercepts[r];
        let state = &mut rows[r];
        let stop = state.iterations + p.max_iter;
        while !state.converged && state.iterations < stop {
            let mut mistakes = 0;
            let mut loss = 0.0;
            for i in epoch_order(n, p.shuffle, seed, r, state.iterations) {
                apply_penalty(&mut w, p.penalty, shrink);
                let xi = x.row(i);
                let margin = t[i] * (w.dot(&xi) + b);
                if margin <= 0.0 {
                    loss -= margin;
                    w.scaled_add(p.eta0 * t[i], &xi);
                    b += p.eta0 * t[i];
                    mistakes += 1;
                }
            }
            state.iterations += 1;
            state.converged = mistakes == 0;
            if let Some(tol) = p.tol {
                let best = state.best_loss.unwrap_or(f64::INFINITY);
                if loss > best - tol * n as f64 {
                    state.stalled += 1;
                } else {
                    state.stalled = 0;
                }
                if loss < best {
                    state.best_loss = Some(loss);
                }
                state.converged |= state.stalled >= NO_CHANGE_EPOCHS;
            }
        }
        weights.row_mut(r).assign(&w);
        intercepts[r] = b;
    }
    LinearModel {
        weights,
        intercepts,
        scoring,
        rows,
        dual: Vec::new(),
    }
}

/// Mean perceptron loss `max(0, −y·f(x))`, summed over the binary rows.
pub(crate) fn objective(m: &LinearModel, x: ArrayView2<f64>, y: &[usize]) -> f64 {
    let raw = m.raw_scores(x);
    let (_, positives) = ovr_layout(if m.weights.nrows() == 1 { 2 } else { m.weights.nrows() });
    positives
        .iter()
        .enumerate()
        .map(|(r, &pos)| {
            let t = signed_targets(y, pos);
            raw.column(r)
                .iter()
                .zip(&t)
                .map(|(s, t)| (-s * t).max(0.0))
                .sum::<f64>()
                / y.len() as f64
        })
        .sum()
}
