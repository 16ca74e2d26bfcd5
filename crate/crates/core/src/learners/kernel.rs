use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf,
    Sigmoid,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl Kernel {
    /// `gamma = 1/n_features`, `coef0 = 0`.
    pub fn for_features(kind: KernelKind, degree: u32, n_features: usize) -> Kernel {
        Kernel {
            kind,
            gamma: 1.0 / n_features.max(1) as f64,
            coef0: 0.0,
            degree,
        }
    }

    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self.kind {
            KernelKind::Linear => a.dot(&b),
            KernelKind::Rbf => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Sigmoid => (self.gamma * a.dot(&b) + self.coef0).tanh(),
            KernelKind::Poly => (self.gamma * a.dot(&b) + self.coef0).powi(self.degree as i32),
        }
    }

    /// `K[i][j] = k(a_i, b_j)`.
    pub fn cross(&self, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
        let dots = a.dot(&b.t());
        match self.kind {
            KernelKind::Linear => dots,
            KernelKind::Sigmoid => dots.mapv(|d| (self.gamma * d + self.coef0).tanh()),
            KernelKind::Poly => dots.mapv(|d| (self.gamma * d + self.coef0).powi(self.degree as i32)),
            KernelKind::Rbf => {
                let na: Vec<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
                let nb: Vec<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
                let mut k = dots;
                for ((i, j), v) in k.indexed_iter_mut() {
                    let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
                    *v = (-self.gamma * d2).exp();
                }
                k
            }
        }
    }

    pub fn gram(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut k = self.cross(x, x);
        // Exact symmetry, and k(x, x) = 1 for rbf regardless of rounding.
        let n = k.nrows();
        for i in 0..n {
            if self.kind == KernelKind::Rbf {
                k[[i, i]] = 1.0;
            }
            for j in 0..i {
                let v = 0.5 * (k[[i, j]] + k[[j, i]]);
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}
