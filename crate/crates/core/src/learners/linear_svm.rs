//! Linear SVM by dual coordinate descent.
//!
//! Primal, with `w̃ = [w, b]` over the augmented design `[X, 1]`:
//!
//! ```text
//! (1/C)·½‖w̃‖² + mean_i loss(y_i w̃·x̃_i)
//! ```
//!
//! which is the usual `½‖w̃‖² + C' Σ loss` with `C' = C/n`. Hinge loss has box
//! `0 ≤ α ≤ C'`; squared hinge has no upper bound and a diagonal shift
//! `1/(2C')`. An epoch visits coordinates in a seeded order and the solver
//! stops once the projected-gradient spread falls below `tol`.

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linear::{ovr_layout, LinearModel, RowState};
use super::{signed_targets, LinearSvmParams, SvmLoss};

fn epoch_order(n: usize, seed: u64, row: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((row as u64) << 32) | epoch as u64);
    order.shuffle(&mut rng);
    order
}

fn augment(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut a = Array2::ones((n, d + 1));
    a.slice_mut(s![.., ..d]).assign(&x);
    a
}

/// Primal objective for the squared hinge; `theta = [w, b]`, `y = ±1`.
pub fn squared_hinge_objective(theta: &[f64], x: ArrayView2<f64>, y: &[f64], c: f64) -> f64 {
    let a = augment(x);
    let w = Array1::from(theta.to_vec());
    let margins = a.dot(&w);
    let loss: f64 = margins
        .iter()
        .zip(y)
        .map(|(m, t)| (1.0 - t * m).max(0.0).powi(2))
        .sum::<f64>()
        / y.len() as f64;
    0.5 * w.dot(&w) / c + loss
}

pub fn squared_hinge_gradient(theta: &[f64], x: ArrayView2<f64>, y: &[f64], c: f64) -> Vec<f64> {
    let a = augment(x);
    let w = Array1::from(theta.to_vec());
    let margins = a.dot(&w);
    let n = y.len() as f64;
    let mut g = &w / c;
    for (i, (m, t)) in margins.iter().zip(y).enumerate() {
        let slack = (1.0 - t * m).max(0.0);
        if slack > 0.0 {
            g.scaled_add(-2.0 * slack * t / n, &a.row(i));
        }
    }
    g.to_vec()
}

/// Hinge-loss primal objective, same conventions.
pub fn hinge_objective(theta: &[f64], x: ArrayView2<f64>, y: &[f64], c: f64) -> f64 {
    let a = augment(x);
    let w = Array1::from(theta.to_vec());
    let margins = a.dot(&w);
    let loss: f64 =
        margins.iter().zip(y).map(|(m, t)| (1.0 - t * m).max(0.0)).sum::<f64>() / y.len() as f64;
    0.5 * w.dot(&w) / c + loss
}

struct Row<'a> {
    a: &'a Array2<f64>,
    sq_norms: &'a [f64],
    t: Vec<f64>,
    upper: f64,
    diag: f64,
}

impl Row<'_> {
    #[allow(clippy::too_many_arguments)]
    fn solve(&self, w: &mut Array1<f64>, alpha: &mut [f64], state: &mut RowState, budget: usize, tol: f64, seed: u64, r: usize) {
        let n = self.t.len();
        let stop = state.iterations + budget;
        while !state.converged && state.iterations < stop {
            let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in epoch_order(n, seed, r, state.iterations) {
                let xi = self.a.row(i);
                let g = self.t[i] * w.dot(&xi) - 1.0 + self.diag * alpha[i];
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == self.upper {
                    g.max(0.0)
                } else {
                    g
                };
                pg_max = pg_max.max(pg);
                pg_min = pg_min.min(pg);
                if pg != 0.0 {
                    let q = self.sq_norms[i] + self.diag;
                    let old = alpha[i];
                    alpha[i] = (old - g / q).clamp(0.0, self.upper);
                    let delta = (alpha[i] - old) * self.t[i];
                    if delta != 0.0 {
                        w.scaled_add(delta, &xi);
                    }
                }
            }
            state.iterations += 1;
            state.converged = pg_max - pg_min < tol;
        }
    }
}

pub(crate) fn fit(
    p: &LinearSvmParams,
    seed: u64,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    warm: Option<&LinearModel>,
) -> (LinearModel, f64) {
    let (n, d) = x.dim();
    let a = augment(x);
    let sq_norms: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let c_prime = p.c / n as f64;
    let (upper, diag) = match p.loss {
        SvmLoss::Hinge => (c_prime, 0.0),
        SvmLoss::SquaredHinge => (f64::INFINITY, 0.5 / c_prime),
    };
    let (scoring, positives) = ovr_layout(n_classes);
    let mut weights = Array2::zeros((positives.len(), d));
    let mut intercepts = vec![0.0; positives.len()];
    let mut rows = vec![RowState::default(); positives.len()];
    let mut dual = vec![vec![0.0; n]; positives.len()];
    let mut objective = 0.0;
    for (r, &pos) in positives.iter().enumerate() {
        let row = Row {
            a: &a,
            sq_norms: &sq_norms,
            t: signed_targets(y, pos),
            upper,
            diag,
        };
        let mut w = Array1::zeros(d + 1);
        if let Some(m) = warm {
            w.slice_mut(s![..d]).assign(&m.weights.row(r));
            w[d] = m.intercepts[r];
            rows[r] = m.rows[r];
            dual[r].clone_from(&m.dual[r]);
        }
        row.solve(&mut w, &mut dual[r], &mut rows[r], p.max_iter, p.tol, seed, r);
        weights.row_mut(r).assign(&w.slice(s![..d]));
        intercepts[r] = w[d];
        let theta = w.to_vec();
        objective += match p.loss {
            SvmLoss::Hinge => hinge_objective(&theta, x, &row.t, p.c),
            SvmLoss::SquaredHinge => squared_hinge_objective(&theta, x, &row.t, p.c),
        };
    }
    (
        LinearModel {
            weights,
            intercepts,
            scoring,
            rows,
            dual,
        },
        objective,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn separable() -> (Array2<f64>, Vec<usize>) {
        (
            array![[0.0, 0.0], [0.5, 0.2], [0.1, 0.6], [3.0, 3.0], [3.5, 2.7], [2.9, 4.0]],
            vec![0, 0, 0, 1, 1, 1],
        )
    }

    #[test]
    fn separates_easy_data() {
        let (x, y) = separable();
        for loss in [SvmLoss::Hinge, SvmLoss::SquaredHinge] {
            let p = LinearSvmParams { loss, c: 100.0, ..Default::default() };
            let (m, _) = fit(&p, 0, x.view(), &y, 2, None);
            assert_eq!(super::super::argmax_rows(&m.decision_values(x.view())), y);
        }
    }

    #[test]
    fn dual_solution_is_primal_optimal() {
        let (x, y) = separable();
        let p = LinearSvmParams { tol: 1e-10, max_iter: 100_000, ..Default::default() };
        let (m, obj) = fit(&p, 0, x.view(), &y, 2, None);
        assert!(m.rows[0].converged);
        let mut theta = m.weights.row(0).to_vec();
        theta.push(m.intercepts[0]);
        let t = signed_targets(&y, 1);
        let g = squared_hinge_gradient(&theta, x.view(), &t, p.c);
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
        assert!((obj - squared_hinge_objective(&theta, x.view(), &t, p.c)).abs() < 1e-15);
    }

    #[test]
    fn warm_resume_matches_cold_run() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.4], [0.1, 0.9], [0.7, 0.7]];
        let y = [0, 1, 2, 1, 0, 2];
        let p = |max_iter| LinearSvmParams { max_iter, c: 10.0, tol: 1e-12, ..Default::default() };
        let (cold, _) = fit(&p(40), 5, x.view(), &y, 3, None);
        let (head, _) = fit(&p(15), 5, x.view(), &y, 3, None);
        let (resumed, _) = fit(&p(25), 5, x.view(), &y, 3, Some(&head));
        assert_eq!(cold, resumed);
        assert_eq!(cold.dual, resumed.dual);
    }
}
