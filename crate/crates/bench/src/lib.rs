//! Synthetic inputs shared by the benchmarks in `benches/`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sketchml::Dataset;

/// `n` rows of Gaussian clouds, one per class, centred on shifted axes.
pub fn blobs(n: usize, d: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let centre = if j % classes == labels[i] { 1.5 } else { 0.0 };
        // Irwin-Hall approximation of a unit normal.
        let noise: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
        centre + noise
    });
    Dataset::labeled(x, labels)
}
