//! Seeded synthetic datasets for tests, benchmarks and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use crate::dataset::{Dataset, LabelId};
use crate::error::{Error, Result};

/// Each point carries exactly one of `num_classes` labels, drawn with random
/// (but fixed per seed) class weights.
pub fn single_label(num_points: usize, num_classes: usize, seed: u64) -> Result<Dataset> {
    if num_classes == 0 {
        return Err(Error::InvalidArgument("num_classes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..num_classes).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let label_sets = (0..num_points)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut class = num_classes - 1;
            for (c, w) in weights.iter().enumerate() {
                if u < *w {
                    class = c;
                    break;
                }
                u -= w;
            }
            vec![class as LabelId]
        })
        .collect();
    Dataset::from_label_sets(num_classes, label_sets)
}

/// Long-tailed multi-label data: label ranks follow a Zipf law with
/// `exponent`, and each point holds `1 + Poisson(avg_labels - 1)` distinct
/// labels (capped at `num_labels`).
pub fn power_law(
    num_points: usize,
    num_labels: usize,
    avg_labels: f64,
    exponent: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_labels == 0 || avg_labels < 1.0 {
        return Err(Error::InvalidArgument(
            "power_law needs num_labels >= 1 and avg_labels >= 1".into(),
        ));
    }
    let zipf = Zipf::new(num_labels as f64, exponent)
        .map_err(|e| Error::InvalidArgument(format!("zipf: {e}")))?;
    let extra = (avg_labels > 1.0)
        .then(|| Poisson::new(avg_labels - 1.0))
        .transpose()
        .map_err(|e| Error::InvalidArgument(format!("poisson: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut label_sets = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        let k = extra.map_or(0.0, |p| p.sample(&mut rng)) as usize + 1;
        let k = k.min(num_labels);
        let mut labels: Vec<LabelId> = Vec::with_capacity(k);
        while labels.len() < k {
            let l = zipf.sample(&mut rng) as LabelId - 1;
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        label_sets.push(labels);
    }
    Dataset::from_label_sets(num_labels, label_sets)
}

/// Power-law data shaped like EURLex-4K: 19,348 points, 3,993 labels and
/// about 5.3 labels per point.
pub fn eurlex_like(seed: u64) -> Result<Dataset> {
    power_law(19_348, 3_993, 5.31, 1.1, seed)
}
