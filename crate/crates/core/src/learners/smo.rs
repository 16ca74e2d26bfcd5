//! Sequential minimal optimization for the kernel SVM dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  0 ≤ α ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K_ij
//! ```
//!
//! The first index of each working pair is the maximal KKT violator; the
//! second maximizes the guaranteed objective decrease among the violators it
//! pairs with. Multiclass problems are reduced one-vs-rest over a shared
//! Gram matrix.

use ndarray::{Array2, ArrayView2};

use super::kernel::Kernel;
use super::linear::ovr_layout;
use super::{signed_targets, KernelModel, KernelSvmParams};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ α_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    pub hit_iteration_cap: bool,
    /// `½ αᵀQα − eᵀα` at exit.
    pub objective: f64,
    /// `max_{I_up} −y∇f − min_{I_low} −y∇f` at exit.
    pub kkt_violation: f64,
}

/// Dual objective `½ αᵀQα − eᵀα` evaluated directly from the Gram matrix.
pub fn dual_objective(gram: ArrayView2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[[i, j]];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Solve one binary dual. `y` holds `±1`.
pub fn solve_binary(
    gram: ArrayView2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
) -> SmoSolution {
    let n = y.len();
    if y.iter().all(|&v| v == y[0]) {
        // yᵀα = 0 with one sign forces α = 0; fall back to the constant rule.
        return SmoSolution {
            alpha: vec![0.0; n],
            bias: y[0],
            iterations: 0,
            hit_iteration_cap: false,
            objective: 0.0,
            kkt_violation: 0.0,
        };
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
    // Symmetric, so rows double as columns; owned rows keep the hot loops contiguous.
    let rows: Vec<Vec<f64>> = gram.rows().into_iter().map(|r| r.to_vec()).collect();
    let in_up = |a: f64, yt: f64| if yt > 0.0 { a < c } else { a > 0.0 };
    let in_low = |a: f64, yt: f64| if yt > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut violation;
    loop {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v >= g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg >= g_max2 {
                g_max2 = yg;
            }
            if i_sel == usize::MAX {
                continue;
            }
            let grad_diff = g_max + yg;
            if grad_diff > 0.0 {
                let quad = diag[i_sel] + diag[t] - 2.0 * rows[i_sel][t];
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        violation = g_max + g_max2;
        if violation < tol || i_sel == usize::MAX || j_sel == usize::MAX {
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let q_ij = y[i] * y[j] * rows[i][j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (d_i, d_j) = (alpha[i] - old_i, alpha[j] - old_j);
        let (yd_i, yd_j) = (y[i] * d_i, y[j] * d_j);
        for (((g, &yt), &ki), &kj) in grad.iter_mut().zip(y).zip(&rows[i]).zip(&rows[j]) {
            *g += yt * (ki * yd_i + kj * yd_j);
        }
    }

    let bias = -rho(&alpha, &grad, y, c);
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    SmoSolution {
        alpha,
        bias,
        iterations,
        hit_iteration_cap: iterations >= max_iter && violation >= tol,
        objective,
        kkt_violation: violation.max(0.0),
    }
}

fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Train one-vs-rest machines. Returns the model, the summed dual objective
/// and whether any machine hit the iteration cap.
pub(crate) fn fit(
    params: &KernelSvmParams,
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
) -> (KernelModel, f64, bool) {
    let kernel = Kernel::for_features(params.kernel, params.degree, x.ncols());
    let gram = kernel.gram(x);
    let (scoring, positives) = ovr_layout(n_classes);
    let solutions: Vec<SmoSolution> = positives
        .iter()
        .map(|&p| {
            let targets = signed_targets(y, p);
            let sol = solve_binary(gram.view(), &targets, params.c, params.tol, params.max_iter);
            log::debug!("smo class {p}: {} iterations, violation {:.2e}", sol.iterations, sol.kkt_violation);
            sol
        })
        .collect();

    let support: Vec<usize> = (0..x.nrows())
        .filter(|&i| solutions.iter().any(|s| s.alpha[i] > 0.0))
        .collect();
    let mut dual_coef = Array2::zeros((positives.len(), support.len()));
    for (m, (sol, &p)) in solutions.iter().zip(&positives).enumerate() {
        for (s, &i) in support.iter().enumerate() {
            let yi = if y[i] == p { 1.0 } else { -1.0 };
            dual_coef[[m, s]] = sol.alpha[i] * yi;
        }
    }
    let model = KernelModel {
        kernel,
        support_vectors: x.select(ndarray::Axis(0), &support),
        support,
        dual_coef,
        intercepts: solutions.iter().map(|s| s.bias).collect(),
        scoring,
        kkt_violation: solutions.iter().map(|s| s.kkt_violation).collect(),
    };
    let objective = solutions.iter().map(|s| s.objective).sum();
    let cap = solutions.iter().any(|s| s.hit_iteration_cap);
    (model, objective, cap)
}
