//! Dataset profile and the linear-separability probe.

use serde::Serialize;

use crate::crossval::{evaluate_model, CrossValError, FoldPlan};
use crate::engine::FeatureMask;
use crate::ingest::Dataset;
use crate::learners::{LinearSvmParams, ModelParams, ModelSpec, PerceptronParams};

/// Perceptron CV accuracy at or above this reads as "possibly separable".
pub const PROBE_THRESHOLD: f64 = 0.5;
/// The confirming linear-SVM probe must reach this for a `separable` verdict.
pub const CONFIRM_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Separability {
    Separable,
    NotSeparable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetProfile {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub is_binary: bool,
    pub separability: Option<Separability>,
    /// Perceptron CV accuracy.
    pub probe_accuracy: Option<f64>,
    /// Linear-SVM CV accuracy; only measured when the perceptron passes.
    pub confirm_accuracy: Option<f64>,
}

pub fn profile(train: &Dataset) -> DatasetProfile {
    let n_classes = train.n_classes();
    DatasetProfile {
        n_instances: train.n_rows(),
        n_features: train.n_features(),
        n_classes,
        is_binary: n_classes == 2,
        separability: None,
        probe_accuracy: None,
        confirm_accuracy: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub verdict: Separability,
    pub probe_accuracy: f64,
    pub confirm_accuracy: Option<f64>,
}

/// Cross-validate the default perceptron; when it reaches
/// [`PROBE_THRESHOLD`], confirm with the default linear SVM.
pub fn separability_test(train: &Dataset, plan: &FoldPlan, seed: u64) -> Result<ProbeResult, CrossValError> {
    let mask = FeatureMask::all(train.n_features());
    let perceptron = ModelSpec::new(ModelParams::Perceptron(PerceptronParams::default()), seed);
    let probe_accuracy = evaluate_model(&perceptron, train, plan, &mask)?.mean_accuracy;
    if probe_accuracy < PROBE_THRESHOLD {
        return Ok(ProbeResult {
            verdict: Separability::NotSeparable,
            probe_accuracy,
            confirm_accuracy: None,
        });
    }
    let svm = ModelSpec::new(ModelParams::LinearSvm(LinearSvmParams::default()), seed);
    let confirm = evaluate_model(&svm, train, plan, &mask)?.mean_accuracy;
    Ok(ProbeResult {
        verdict: if confirm >= CONFIRM_THRESHOLD {
            Separability::Separable
        } else {
            Separability::NotSeparable
        },
        probe_accuracy,
        confirm_accuracy: Some(confirm),
    })
}

impl DatasetProfile {
    pub fn with_probe(mut self, probe: &ProbeResult) -> DatasetProfile {
        self.separability = Some(probe.verdict);
        self.probe_accuracy = Some(probe.probe_accuracy);
        self.confirm_accuracy = probe.confirm_accuracy;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossval::stratified_folds;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    // Box-Muller.
    fn normal(rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let v: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    #[test]
    fn counts() {
        let d = Dataset::labeled(array![[0.0, 1.0], [1.0, 0.0]], vec![0, 1]);
        let p = profile(&d);
        assert_eq!((p.n_instances, p.n_features, p.n_classes), (2, 2, 2));
        assert!(p.is_binary);
        assert_eq!(p.separability, None);
    }

    #[test]
    fn xor_is_not_separable() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let d = Dataset::labeled(x, vec![0, 0, 1, 1]);
        let plan = stratified_folds(d.labels().unwrap(), 2, 0).unwrap();
        let r = separability_test(&d, &plan, 0).unwrap();
        assert_eq!(r.verdict, Separability::NotSeparable);
        assert!((0.0..=1.0).contains(&r.probe_accuracy));
    }

    #[test]
    fn distant_blobs_are_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100;
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            let centre = if i % 2 == 0 { -3.0 } else { 3.0 };
            centre + 0.5 * normal(&mut rng)
        });
        let d = Dataset::labeled(x, (0..n).map(|i| i % 2).collect());
        let plan = stratified_folds(d.labels().unwrap(), 5, 0).unwrap();
        let r = separability_test(&d, &plan, 0).unwrap();
        assert_eq!(r.verdict, Separability::Separable);
        assert_eq!(r.probe_accuracy, 1.0);
        assert_eq!(separability_test(&d, &plan, 0).unwrap(), r);
    }
}
