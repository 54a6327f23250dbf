//! Test-only oracles shared by the integration targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xstrat::baseline::{iterative_split_observed, Budgets};
use xstrat::dataset::{Dataset, LabelId, Partition, SplitAssignment};

/// Quadratic re-statement of the greedy procedure: every round rescans all
/// points to find the label with the fewest unallocated examples.
pub fn reference_iterative(dataset: &Dataset, t: f64, seed: u64) -> Vec<Partition> {
    let n = dataset.num_points();
    let num_labels = dataset.num_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = [n as f64 * (1.0 - t), n as f64 * t];
    let mut label: Vec<[f64; 2]> = dataset
        .label_frequency()
        .iter()
        .map(|&f| [f as f64 * (1.0 - t), f as f64 * t])
        .collect();
    let mut out: Vec<Option<usize>> = vec![None; n];
    let pick = |lb: Option<[f64; 2]>, sb: [f64; 2], rng: &mut ChaCha8Rng| -> usize {
        if let Some(lb) = lb {
            if lb[0] > lb[1] {
                return 0;
            }
            if lb[1] > lb[0] {
                return 1;
            }
        }
        if sb[0] > sb[1] {
            0
        } else if sb[1] > sb[0] {
            1
        } else {
            rng.random_range(0..2)
        }
    };
    loop {
        let mut best: Option<(usize, usize)> = None;
        for l in 0..num_labels {
            let left = (0..n)
                .filter(|&i| out[i].is_none() && dataset.labels_of(i).contains(&(l as LabelId)))
                .count();
            if left > 0 && best.map_or(true, |(c, _)| left < c) {
                best = Some((left, l));
            }
        }
        let Some((_, l)) = best else { break };
        for i in 0..n {
            if out[i].is_some() || !dataset.labels_of(i).contains(&(l as LabelId)) {
                continue;
            }
            let j = pick(Some(label[l]), subset, &mut rng);
            out[i] = Some(j);
            subset[j] -= 1.0;
            for &m in dataset.labels_of(i) {
                label[m as usize][j] -= 1.0;
            }
        }
    }
    for i in 0..n {
        if out[i].is_none() {
            let j = pick(None, subset, &mut rng);
            out[i] = Some(j);
            subset[j] -= 1.0;
        }
    }
    out.into_iter()
        .map(|j| if j == Some(1) { Partition::Test } else { Partition::Train })
        .collect()
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Dataset, f64) {
    let n = rng.random_range(1..=12);
    let num_labels = rng.random_range(1..=4);
    let sets = (0..n)
        .map(|_| {
            (0..num_labels as LabelId)
                .filter(|_| rng.random_bool(0.4))
                .collect()
        })
        .collect();
    let t = [0.2, 0.25, 1.0 / 3.0, 0.5][rng.random_range(0..4)];
    (Dataset::from_label_sets(num_labels, sets).unwrap(), t)
}

/// Runs the library with an observer that checks, after every allocation,
/// that exactly the point's labels lost one unit of total budget.
pub fn checked_iterative(dataset: &Dataset, t: f64, seed: u64) -> (SplitAssignment, usize) {
    let mut previous: Option<Budgets> = None;
    let mut steps = 0;
    let initial_total: Vec<f64> = dataset.label_frequency().iter().map(|&f| f as f64).collect();
    let split = iterative_split_observed(dataset, t, seed, None, |step| {
        let before: Vec<f64> = match &previous {
            Some(b) => b.label.iter().map(|x| x[0] + x[1]).collect(),
            None => initial_total.clone(),
        };
        let labels = dataset.labels_of(step.point);
        for (l, b) in step.budgets.label.iter().enumerate() {
            let drop = before[l] - (b[0] + b[1]);
            let expected = if labels.contains(&(l as LabelId)) { 1.0 } else { 0.0 };
            assert!((drop - expected).abs() < 1e-9, "label {l} budget moved by {drop}");
        }
        previous = Some(step.budgets.clone());
        steps += 1;
    })
    .unwrap();
    (split, steps)
}

