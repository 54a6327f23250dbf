//! Baseline samplers: uniform random splitting and greedy iterative
//! stratification (rarest label first, against per-subset budgets).

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabelId, Partition, SplitAssignment};
use crate::error::{Error, Result};
use crate::sampler::initialize_split;

/// Uniform random split with exactly `round(num_points * target)` TEST
/// points.
pub fn random_split<R: Rng + ?Sized>(
    num_points: usize,
    target_test_size: f64,
    rng: &mut R,
) -> Result<SplitAssignment> {
    initialize_split(num_points, target_test_size, rng)
}

/// [`random_split`] driven by a `ChaCha8Rng` seeded with `seed`; this is the
/// same draw the stratified sampler starts from.
pub fn random_split_seeded(
    num_points: usize,
    target_test_size: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_split(num_points, target_test_size, &mut rng)?.with_seed(Some(seed)))
}

const SUBSETS: [Partition; 2] = [Partition::Train, Partition::Test];

#[inline]
fn subset_index(p: Partition) -> usize {
    match p {
        Partition::Train => 0,
        Partition::Test => 1,
    }
}

/// Remaining desired example counts, per subset and per (label, subset).
/// Index 0 is TRAIN, index 1 is TEST. Budgets are fractional and may go
/// negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Budgets {
    pub subset: [f64; 2],
    pub label: Vec<[f64; 2]>,
}

impl Budgets {
    fn new(dataset: &Dataset, target_test_size: f64) -> Self {
        let ratios = [1.0 - target_test_size, target_test_size];
        let n = dataset.num_points() as f64;
        Self {
            subset: [n * ratios[0], n * ratios[1]],
            label: dataset
                .label_frequency()
                .iter()
                .map(|&f| [f as f64 * ratios[0], f as f64 * ratios[1]])
                .collect(),
        }
    }

    pub fn get(&self, label: LabelId, partition: Partition) -> f64 {
        self.label[label as usize][subset_index(partition)]
    }

    pub fn subset(&self, partition: Partition) -> f64 {
        self.subset[subset_index(partition)]
    }
}

/// One allocation made by [`iterative_split_observed`].
#[derive(Debug)]
pub struct AllocationStep<'a> {
    pub point: usize,
    pub partition: Partition,
    /// Label whose turn placed the point; `None` for label-free points.
    pub via_label: Option<LabelId>,
    /// Budgets after the allocation.
    pub budgets: &'a Budgets,
}

/// Picks the subset with the larger budget, then the larger subset budget,
/// then a fair coin.
fn choose_subset<R: Rng>(label_budget: Option<[f64; 2]>, subset: [f64; 2], rng: &mut R) -> Partition {
    if let Some([train, test]) = label_budget {
        if train != test {
            return if train > test { Partition::Train } else { Partition::Test };
        }
    }
    let [train, test] = subset;
    if train != test {
        return if train > test { Partition::Train } else { Partition::Test };
    }
    SUBSETS[rng.random_range(0..2)]
}

/// Iterative stratification into TRAIN/TEST with desired proportions
/// `(1 - target, target)`. Full ties are broken by a `ChaCha8Rng` seeded with
/// `seed`.
pub fn iterative_split(dataset: &Dataset, target_test_size: f64, seed: u64) -> Result<SplitAssignment> {
    iterative_split_observed(dataset, target_test_size, seed, None, |_| {})
}

/// [`iterative_split`] with an optional wall-clock limit and a callback run
/// after every allocation.
///
/// The label to process next is the one with the fewest unallocated
/// examples (lowest id on ties). Each of its unallocated points goes to the
/// subset with the largest remaining budget for that label; the budgets of
/// every label on the point and of the subset drop by one. Points without
/// labels are placed last, by subset budget alone.
pub fn iterative_split_observed<F>(
    dataset: &Dataset,
    target_test_size: f64,
    seed: u64,
    timeout: Option<Duration>,
    mut observe: F,
) -> Result<SplitAssignment>
where
    F: FnMut(&AllocationStep<'_>),
{
    if dataset.num_points() == 0 {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    if !(target_test_size > 0.0 && target_test_size < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target_test_size must lie in (0, 1), got {target_test_size}"
        )));
    }
    let started = Instant::now();
    let check_deadline = |done: usize| -> Result<()> {
        match timeout {
            Some(limit) if done.is_multiple_of(256) && started.elapsed() >= limit => Err(Error::Timeout(limit)),
            _ => Ok(()),
        }
    };

    let n = dataset.num_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budgets = Budgets::new(dataset, target_test_size);
    let mut allocated: Vec<Option<Partition>> = vec![None; n];

    // Inverted index: points carrying each label, in point order.
    let num_labels = dataset.num_labels();
    let mut offsets = vec![0usize; num_labels + 1];
    for labels in dataset.iter_label_sets() {
        for &l in labels {
            offsets[l as usize + 1] += 1;
        }
    }
    for l in 0..num_labels {
        offsets[l + 1] += offsets[l];
    }
    let mut fill = offsets.clone();
    let mut points_of = vec![0usize; dataset.num_instances()];
    for (point, labels) in dataset.iter_label_sets().enumerate() {
        for &l in labels {
            points_of[fill[l as usize]] = point;
            fill[l as usize] += 1;
        }
    }

    let mut remaining: Vec<u32> = dataset.label_frequency().to_vec();
    let mut queue: BTreeSet<(u32, LabelId)> = remaining
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0)
        .map(|(l, &r)| (r, l as LabelId))
        .collect();

    let mut done = 0usize;
    check_deadline(done)?;
    while let Some(&(_, label)) = queue.first() {
        for &point in &points_of[offsets[label as usize]..offsets[label as usize + 1]] {
            if allocated[point].is_some() {
                continue;
            }
            let partition = choose_subset(
                Some(budgets.label[label as usize]),
                budgets.subset,
                &mut rng,
            );
            let j = subset_index(partition);
            allocated[point] = Some(partition);
            budgets.subset[j] -= 1.0;
            for &l in dataset.labels_of(point) {
                let li = l as usize;
                budgets.label[li][j] -= 1.0;
                queue.remove(&(remaining[li], l));
                remaining[li] -= 1;
                if remaining[li] > 0 {
                    queue.insert((remaining[li], l));
                }
            }
            observe(&AllocationStep {
                point,
                partition,
                via_label: Some(label),
                budgets: &budgets,
            });
            done += 1;
            check_deadline(done)?;
        }
    }

    for point in 0..n {
        if allocated[point].is_some() {
            continue;
        }
        debug_assert!(dataset.labels_of(point).is_empty());
        let partition = choose_subset(None, budgets.subset, &mut rng);
        budgets.subset[subset_index(partition)] -= 1.0;
        allocated[point] = Some(partition);
        observe(&AllocationStep {
            point,
            partition,
            via_label: None,
            budgets: &budgets,
        });
        done += 1;
        check_deadline(done)?;
    }

    let partition_of = allocated
        .into_iter()
        .map(|p| p.expect("every point is allocated"))
        .collect();
    Ok(SplitAssignment::new(partition_of, Some(seed)))
}
