//! Logistic regression minimizing `(1/C)·R(w) + mean log-loss`.
//!
//! Parameters are handled as flat vectors over the augmented design
//! `[X, 1]`: `d + 1` entries per binary row, or `K·(d + 1)` for the joint
//! softmax model (class-major). Intercepts are never penalized.
//!
//! * `gradient`: proximal gradient with constant step `1/L`; stops when the
//!   gradient mapping `‖Δθ‖∞ / step` drops below `tol`.
//! * `newton`: damped Newton with Armijo backtracking; stops when `‖∇‖∞ < tol`.

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};

use super::linear::{ovr_layout, LinearModel, RowState, Scoring};
use super::{LearnError, LogisticParams, LogisticSolver, MultiClass, Penalty};

const RIDGE: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// One smooth-plus-penalty problem over an augmented design.
pub struct Problem {
    /// `[X, 1]`, `n × (d + 1)`.
    design: Array2<f64>,
    /// Class index per row.
    labels: Vec<usize>,
    /// Softmax classes, or `None` for a binary problem against `positive`.
    classes: Option<usize>,
    positive: usize,
    c: f64,
    penalty: Penalty,
}

impl Problem {
    /// Binary problem: `positive` against every other label.
    pub fn binary(x: ArrayView2<f64>, y: &[usize], positive: usize, c: f64, penalty: Penalty) -> Problem {
        Problem {
            design: augment(x),
            labels: y.to_vec(),
            classes: None,
            positive,
            c,
            penalty,
        }
    }

    pub fn softmax(x: ArrayView2<f64>, y: &[usize], n_classes: usize, c: f64, penalty: Penalty) -> Problem {
        Problem {
            design: augment(x),
            labels: y.to_vec(),
            classes: Some(n_classes),
            positive: 0,
            c,
            penalty,
        }
    }

    fn width(&self) -> usize {
        self.design.ncols()
    }

    fn n_blocks(&self) -> usize {
        self.classes.unwrap_or(1)
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.width()
    }

    fn n(&self) -> f64 {
        self.design.nrows() as f64
    }

    fn theta_matrix(&self, theta: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((self.n_blocks(), self.width()), theta.to_vec()).expect("theta length")
    }

    fn is_weight(&self, idx: usize) -> bool {
        idx % self.width() != self.width() - 1
    }

    fn penalty_value(&self, theta: &[f64]) -> f64 {
        let w = theta.iter().enumerate().filter(|(i, _)| self.is_weight(*i)).map(|(_, v)| v);
        match self.penalty {
            Penalty::None => 0.0,
            Penalty::L2 => 0.5 * w.map(|v| v * v).sum::<f64>() / self.c,
            Penalty::L1 => w.map(|v| v.abs()).sum::<f64>() / self.c,
        }
    }

    /// Mean log-loss plus the smooth part of the penalty (l2 only).
    fn smooth_value(&self, theta: &[f64]) -> f64 {
        let loss = self.mean_loss(theta);
        match self.penalty {
            Penalty::L2 => loss + self.penalty_value(theta),
            _ => loss,
        }
    }

    fn mean_loss(&self, theta: &[f64]) -> f64 {
        let scores = self.design.dot(&self.theta_matrix(theta).t());
        let total: f64 = match self.classes {
            None => scores
                .column(0)
                .iter()
                .zip(&self.labels)
                .map(|(&s, &l)| softplus(if l == self.positive { -s } else { s }))
                .sum(),
            Some(_) => scores
                .axis_iter(Axis(0))
                .zip(&self.labels)
                .map(|(row, &l)| log_sum_exp(row) - row[l])
                .sum(),
        };
        total / self.n()
    }

    /// Full objective `(1/C)·R(w) + mean loss`.
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.mean_loss(theta) + self.penalty_value(theta)
    }

    /// Residuals `p − t`, `n × blocks`.
    fn residuals(&self, theta: &[f64]) -> Array2<f64> {
        let mut scores = self.design.dot(&self.theta_matrix(theta).t());
        match self.classes {
            None => {
                for (v, &l) in scores.column_mut(0).iter_mut().zip(&self.labels) {
                    *v = sigmoid(*v) - if l == self.positive { 1.0 } else { 0.0 };
                }
            }
            Some(_) => {
                for (mut row, &l) in scores.axis_iter_mut(Axis(0)).zip(&self.labels) {
                    let lse = log_sum_exp(row.view());
                    row.mapv_inplace(|v| (v - lse).exp());
                    row[l] -= 1.0;
                }
            }
        }
        scores
    }

    fn smooth_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = self.residuals(theta).t().dot(&self.design) / self.n();
        let mut g: Vec<f64> = g.iter().copied().collect();
        if self.penalty == Penalty::L2 {
            for (i, gi) in g.iter_mut().enumerate() {
                if self.is_weight(i) {
                    *gi += theta[i] / self.c;
                }
            }
        }
        g
    }

    /// Gradient of [`Problem::value`]; for l1 this is the gradient wherever no
    /// weight is exactly zero.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = self.smooth_gradient(theta);
        if self.penalty == Penalty::L1 {
            for (i, gi) in g.iter_mut().enumerate() {
                if self.is_weight(i) {
                    *gi += theta[i].signum() / self.c;
                }
            }
        }
        g
    }

    /// Hessian of the smooth part, plus a tiny ridge.
    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let (n, w) = self.design.dim();
        let k = self.n_blocks();
        let dim = k * w;
        let mut h = DMatrix::zeros(dim, dim);
        let scores = self.design.dot(&self.theta_matrix(theta).t());
        for i in 0..n {
            let xi = self.design.row(i);
            // Per-sample curvature between blocks a and b.
            let curv: Vec<Vec<f64>> = match self.classes {
                None => {
                    let p = sigmoid(scores[[i, 0]]);
                    vec![vec![p * (1.0 - p)]]
                }
                Some(_) => {
                    let lse = log_sum_exp(scores.row(i));
                    let p: Vec<f64> = scores.row(i).iter().map(|v| (v - lse).exp()).collect();
                    (0..k)
                        .map(|a| (0..k).map(|b| if a == b { p[a] * (1.0 - p[a]) } else { -p[a] * p[b] }).collect())
                        .collect()
                }
            };
            for a in 0..k {
                for b in 0..k {
                    let s = curv[a][b] / n as f64;
                    if s == 0.0 {
                        continue;
                    }
                    for u in 0..w {
                        let su = s * xi[u];
                        for v in 0..w {
                            h[(a * w + u, b * w + v)] += su * xi[v];
                        }
                    }
                }
            }
        }
        for i in 0..dim {
            if self.penalty == Penalty::L2 && self.is_weight(i) {
                h[(i, i)] += 1.0 / self.c;
            }
            h[(i, i)] += RIDGE;
        }
        h
    }

    /// Lipschitz constant of the smooth gradient.
    fn lipschitz(&self) -> f64 {
        let gram = self.design.t().dot(&self.design) / self.n();
        let m = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| gram[[i, j]]);
        let lambda = m.symmetric_eigenvalues().max().max(0.0);
        let curvature = if self.classes.is_some() { 0.5 } else { 0.25 };
        let l2 = if self.penalty == Penalty::L2 { 1.0 / self.c } else { 0.0 };
        (curvature * lambda + l2).max(1e-12)
    }
}

fn augment(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut a = Array2::ones((n, d + 1));
    a.slice_mut(s![.., ..d]).assign(&x);
    a
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Advance `theta` by up to `budget` more iterations.
fn run_solver(
    problem: &Problem,
    solver: LogisticSolver,
    tol: f64,
    theta: &mut [f64],
    state: &mut RowState,
    budget: usize,
) {
    let stop = state.iterations + budget;
    match solver {
        LogisticSolver::Gradient => {
            let step = 1.0 / problem.lipschitz();
            let threshold = step / problem.c;
            while !state.converged && state.iterations < stop {
                let g = problem.smooth_gradient(theta);
                let mut change: f64 = 0.0;
                for i in 0..theta.len() {
                    let mut v = theta[i] - step * g[i];
                    if problem.penalty == Penalty::L1 && problem.is_weight(i) {
                        v = v.signum() * (v.abs() - threshold).max(0.0);
                    }
                    change = change.max((v - theta[i]).abs());
                    theta[i] = v;
                }
                state.iterations += 1;
                state.converged = change / step < tol;
            }
        }
        LogisticSolver::Newton => {
            while !state.converged && state.iterations < stop {
                let g = problem.smooth_gradient(theta);
                if inf_norm(&g) < tol {
                    state.converged = true;
                    break;
                }
                let h = problem.hessian(theta);
                let rhs = -DVector::from_column_slice(&g);
                let dir = match h.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => h.lu().solve(&rhs).unwrap_or(rhs),
                };
                let slope: f64 = dir.iter().zip(&g).map(|(d, g)| d * g).sum();
                let f0 = problem.smooth_value(theta);
                let mut t = 1.0;
                let mut candidate = theta.to_vec();
                for _ in 0..MAX_HALVINGS {
                    for (c, (th, d)) in candidate.iter_mut().zip(theta.iter().zip(dir.iter())) {
                        *c = th + t * d;
                    }
                    if problem.smooth_value(&candidate) <= f0 + ARMIJO * t * slope {
                        break;
                    }
                    t *= 0.5;
                }
                theta.copy_from_slice(&candidate);
                state.iterations += 1;
                if inf_norm(&problem.smooth_gradient(theta)) < tol {
                    state.converged = true;
                }
            }
        }
    }
}

pub(crate) fn fit(
    p: &LogisticParams,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    warm: Option<&LinearModel>,
) -> Result<(LinearModel, f64), LearnError> {
    if p.solver == LogisticSolver::Newton && p.penalty == Penalty::L1 {
        return Err(LearnError::Unsupported("newton solver supports l2 or no penalty".into()));
    }
    if p.c.is_nan() || p.c <= 0.0 {
        return Err(LearnError::Unsupported("C must be positive".into()));
    }
    let d = x.ncols();
    let problems: Vec<Problem> = match p.multi_class {
        MultiClass::Multinomial => vec![Problem::softmax(x, y, n_classes, p.c, p.penalty)],
        MultiClass::Ovr => ovr_layout(n_classes)
            .1
            .into_iter()
            .map(|pos| Problem::binary(x, y, pos, p.c, p.penalty))
            .collect(),
    };
    let scoring = match p.multi_class {
        MultiClass::Multinomial => Scoring::Softmax,
        MultiClass::Ovr => ovr_layout(n_classes).0,
    };

    let mut weights = Array2::zeros((0, d));
    let mut intercepts = Vec::new();
    let mut rows = Vec::new();
    let mut objective = 0.0;
    for (r, problem) in problems.iter().enumerate() {
        let blocks = problem.n_blocks();
        let mut theta = vec![0.0; problem.dim()];
        let mut state = RowState::default();
        if let Some(w) = warm {
            if w.scoring != scoring {
                return Err(LearnError::WarmIncompatible("model layout differs".into()));
            }
            let offset = if blocks == 1 { r } else { 0 };
            for b in 0..blocks {
                let row = offset + b;
                theta[b * (d + 1)..b * (d + 1) + d].copy_from_slice(w.weights.row(row).as_slice().expect("contiguous"));
                theta[b * (d + 1) + d] = w.intercepts[row];
            }
            state = w.rows[r];
        }
        run_solver(problem, p.solver, p.tol, &mut theta, &mut state, p.max_iter);
        objective += problem.value(&theta);
        for b in 0..blocks {
            let chunk = &theta[b * (d + 1)..(b + 1) * (d + 1)];
            weights
                .push_row(ArrayView1::from(&chunk[..d]))
                .expect("row width");
            intercepts.push(chunk[d]);
        }
        rows.push(state);
    }
    Ok((
        LinearModel {
            weights,
            intercepts,
            scoring,
            rows,
            dual: Vec::new(),
        },
        objective,
    ))
}

/// Class probabilities. One-vs-rest scores are normalized per row.
pub fn predict_proba(model: &LinearModel, x: ArrayView2<f64>) -> Array2<f64> {
    let raw = model.raw_scores(x);
    match model.scoring {
        Scoring::Binary => {
            let mut out = Array2::zeros((raw.nrows(), 2));
            for (i, &s) in raw.column(0).iter().enumerate() {
                let p = sigmoid(s);
                out[[i, 0]] = 1.0 - p;
                out[[i, 1]] = p;
            }
            out
        }
        Scoring::Softmax => {
            let mut out = raw;
            for mut row in out.axis_iter_mut(Axis(0)) {
                let lse = log_sum_exp(row.view());
                row.mapv_inplace(|v| (v - lse).exp());
            }
            out
        }
        Scoring::OneVsRest => {
            let mut out = raw.mapv(sigmoid);
            for mut row in out.axis_iter_mut(Axis(0)) {
                let total = row.sum();
                row /= total;
            }
            out
        }
    }
}

/// Weight vector norm per subproblem; used for regularization-path checks.
pub fn weight_norm(model: &LinearModel) -> f64 {
    model.weights.iter().map(|v| v * v).sum::<f64>().sqrt()
}
