//! Swap-based stratified sampling.
//!
//! Starting from a random split at the target test size, every epoch:
//!
//! 1. tallies each label's instances in TRAIN and TEST,
//! 2. scores each label by how far its test proportion sits from the target,
//!    normalized to `[-1, 1]` (positive = too much of the label in TEST),
//! 3. scores each point by summing its labels' scores, oriented so that a
//!    high score means the point sits in the partition that over-holds its
//!    labels,
//! 4. flips the points scoring strictly above the upper `threshold_proportion`
//!    quantile, each with probability `swap_probability`,
//! 5. divides both the threshold proportion and the swap probability by
//!    `decay`.
//!
//! The test size is not re-normalized after swaps: the split settles at
//! whatever size balances label coverage against the target proportion.
//!
//! Every stage is data-parallel with a barrier in between, and the swap draw
//! for a point depends only on `(seed, epoch, point)`, so the result does not
//! depend on the number of worker threads.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{count_labels, Dataset, LabelCounts, Partition, SplitAssignment};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_THRESHOLD_PROPORTION: f64 = 0.1;
pub const DEFAULT_SWAP_PROBABILITY: f64 = 0.1;
pub const DEFAULT_DECAY: f64 = 1.1;

const POINT_CHUNK_LEN: usize = 1024;

/// Stream bit separating tie-ranking draws from swap draws.
const TIE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Desired fraction of points in TEST, strictly inside (0, 1).
    pub target_test_size: f64,
    pub epochs: usize,
    /// Fraction of highest-scoring points eligible for a swap in epoch 1.
    pub threshold_proportion: f64,
    /// Probability that an eligible point is flipped in epoch 1.
    pub swap_probability: f64,
    /// Per-epoch divisor applied to the two quantities above.
    pub decay: f64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(target_test_size: f64, seed: u64) -> Self {
        Self {
            target_test_size,
            epochs: DEFAULT_EPOCHS,
            threshold_proportion: DEFAULT_THRESHOLD_PROPORTION,
            swap_probability: DEFAULT_SWAP_PROBABILITY,
            decay: DEFAULT_DECAY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.target_test_size > 0.0 && self.target_test_size < 1.0) {
            return bad(format!(
                "target_test_size must lie in (0, 1), got {}",
                self.target_test_size
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.threshold_proportion > 0.0 && self.threshold_proportion <= 1.0) {
            return bad(format!(
                "threshold_proportion must lie in (0, 1], got {}",
                self.threshold_proportion
            ));
        }
        if !(0.0..=1.0).contains(&self.swap_probability) {
            return bad(format!(
                "swap_probability must lie in [0, 1], got {}",
                self.swap_probability
            ));
        }
        if !(self.decay >= 1.0 && self.decay.is_finite()) {
            return bad(format!("decay must be a finite value >= 1, got {}", self.decay));
        }
        Ok(())
    }
}

/// Number of TEST points a random split of `num_points` at `target` holds.
pub fn test_quota(num_points: usize, target_test_size: f64) -> Result<usize> {
    if !(target_test_size > 0.0 && target_test_size < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target_test_size must lie in (0, 1), got {target_test_size}"
        )));
    }
    let quota = (num_points as f64 * target_test_size).round() as usize;
    if quota == 0 || quota >= num_points {
        return Err(Error::InvalidConfig(format!(
            "a test size of {target_test_size} over {num_points} points leaves one partition empty"
        )));
    }
    Ok(quota)
}

/// Random split holding exactly `round(num_points * target)` TEST points:
/// a seeded shuffle of the point indices whose first `quota` entries go to
/// TEST.
pub fn initialize_split<R: Rng + ?Sized>(
    num_points: usize,
    target_test_size: f64,
    rng: &mut R,
) -> Result<SplitAssignment> {
    let quota = test_quota(num_points, target_test_size)?;
    let mut order: Vec<usize> = (0..num_points).collect();
    order.shuffle(rng);
    let mut assignment = SplitAssignment::all(num_points, Partition::Train);
    for &point in &order[..quota] {
        assignment.set(point, Partition::Test);
    }
    Ok(assignment)
}

/// Normalized deviation of a label's test proportion from the target.
///
/// Over-represented labels are scaled by the room above the target and
/// under-represented ones by the room below it, so the result spans `[-1, 1]`.
#[inline]
pub fn label_score(test_proportion: f64, target_test_size: f64) -> f64 {
    let deviation = test_proportion - target_test_size;
    if test_proportion >= target_test_size {
        deviation / (1.0 - target_test_size)
    } else {
        deviation / target_test_size
    }
}

/// Scores every label; labels without instances score 0.
pub fn label_scores(counts: &LabelCounts, target_test_size: f64) -> Vec<f64> {
    (0..counts.num_labels())
        .into_par_iter()
        .with_min_len(POINT_CHUNK_LEN)
        .map(|l| match counts.test_proportion(l) {
            Ok(atp) => label_score(atp, target_test_size),
            Err(_) => 0.0,
        })
        .collect()
}

/// Sums each point's label scores, oriented by the point's partition.
///
/// For a TEST point an over-represented label (positive score) adds to the
/// point's score and an under-represented one subtracts; for a TRAIN point
/// the signs reverse. Points without labels score 0.
pub fn point_scores(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    label_scores: &[f64],
) -> Result<Vec<f64>> {
    assignment.check_matches(dataset)?;
    if label_scores.len() != dataset.num_labels() {
        return Err(Error::InvalidArgument(format!(
            "{} label scores for {} labels",
            label_scores.len(),
            dataset.num_labels()
        )));
    }
    Ok((0..dataset.num_points())
        .into_par_iter()
        .with_min_len(POINT_CHUNK_LEN)
        .map(|point| {
            let in_test = assignment.is_test(point);
            dataset.labels_of(point).iter().fold(0.0, |acc, &l| {
                let s = label_scores[l as usize];
                if in_test {
                    acc + s
                } else {
                    acc - s
                }
            })
        })
        .collect())
}

/// Nearest-rank `(1 - threshold_proportion)` quantile of `scores`.
///
/// At most `floor(threshold_proportion * n)` scores lie strictly above the
/// returned value. With `threshold_proportion == 1` every finite score is
/// above it.
pub fn threshold_score(scores: &[f64], threshold_proportion: f64) -> f64 {
    let rank = scores.len() - eligible_quota(scores.len(), threshold_proportion);
    if rank == 0 {
        return f64::NEG_INFINITY;
    }
    let mut work = scores.to_vec();
    let (_, nth, _) = work.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *nth
}

/// Counter-based uniform draws: the draw for `point` depends only on
/// `(seed, stream, point)`, never on evaluation order.
#[derive(Debug, Clone)]
pub struct PointDraws {
    key: <ChaCha8Rng as SeedableRng>::Seed,
    stream: u64,
}

impl PointDraws {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = <ChaCha8Rng as SeedableRng>::Seed::default();
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        Self { key, stream }
    }

    /// Uniform value in `[0, 1)` for `point`.
    pub fn uniform(&self, point: usize) -> f64 {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        rng.set_word_pos(point as u128 * 2);
        rng.random::<f64>()
    }
}

/// Points eligible for a swap: those scoring strictly above the
/// `(1 - threshold_proportion)` quantile, topped up to
/// `floor(threshold_proportion * n)` from the points tied *at* the quantile
/// when that tied score is positive. Tied points are ranked by a seeded
/// per-point key, so the choice is reproducible and order-independent.
///
/// Without the top-up, a block of identical scores larger than the eligible
/// fraction (every point of one class in one partition, in single-label data)
/// would freeze the split.
pub fn eligible_points(scores: &[f64], threshold_proportion: f64, tie_draws: &PointDraws) -> Vec<usize> {
    let quota = eligible_quota(scores.len(), threshold_proportion);
    let threshold = threshold_score(scores, threshold_proportion);
    let mut eligible: Vec<usize> = scores
        .par_iter()
        .enumerate()
        .with_min_len(POINT_CHUNK_LEN)
        .filter_map(|(point, &s)| (s > threshold).then_some(point))
        .collect();
    if eligible.len() < quota && threshold > 0.0 {
        let mut tied: Vec<(f64, usize)> = scores
            .par_iter()
            .enumerate()
            .with_min_len(POINT_CHUNK_LEN)
            .filter_map(|(point, &s)| (s == threshold).then(|| (tie_draws.uniform(point), point)))
            .collect();
        tied.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let need = quota - eligible.len();
        eligible.extend(tied.into_iter().take(need).map(|(_, point)| point));
        eligible.sort_unstable();
    }
    eligible
}

/// Upper bound on the number of swap-eligible points.
pub fn eligible_quota(num_points: usize, threshold_proportion: f64) -> usize {
    // Guard against 0.3 * 10 = 2.9999999999999996 style rounding.
    (((threshold_proportion * num_points as f64) + 1e-9).floor() as usize).min(num_points)
}

/// Flips each point in `eligible` with probability `swap_probability`.
/// Returns the number of points flipped.
pub fn swap_pass(
    eligible: &[usize],
    swap_probability: f64,
    draws: &PointDraws,
    assignment: &mut SplitAssignment,
) -> usize {
    if swap_probability <= 0.0 {
        return 0;
    }
    let flips: Vec<usize> = eligible
        .par_iter()
        .with_min_len(POINT_CHUNK_LEN)
        .copied()
        .filter(|&point| draws.uniform(point) < swap_probability)
        .collect();
    for &point in &flips {
        assignment.flip(point);
    }
    flips.len()
}

/// Value of a decayed parameter in `epoch` (1-based): epoch 1 uses the
/// initial value, each later epoch divides by `decay` once more.
pub fn decay_schedule(initial: f64, decay: f64, epoch: usize) -> f64 {
    debug_assert!(epoch >= 1);
    initial / decay.powi(epoch.saturating_sub(1) as i32)
}

/// Label scores, point scores and the swap threshold for one assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    pub label_score: Vec<f64>,
    pub point_score: Vec<f64>,
    pub threshold_score: f64,
}

impl ScoreState {
    pub fn compute(
        dataset: &Dataset,
        assignment: &SplitAssignment,
        target_test_size: f64,
        threshold_proportion: f64,
    ) -> Result<Self> {
        let counts = count_labels(dataset, assignment)?;
        let label_score = label_scores(&counts, target_test_size);
        let point_score = point_scores(dataset, assignment, &label_score)?;
        let threshold_score = threshold_score(&point_score, threshold_proportion);
        Ok(Self {
            label_score,
            point_score,
            threshold_score,
        })
    }

    /// Mean `|label_score|` over the labels present in `dataset`.
    pub fn mean_abs_label_score(&self, dataset: &Dataset) -> f64 {
        let (sum, n) = self
            .label_score
            .iter()
            .zip(dataset.label_frequency())
            .filter(|(_, &f)| f > 0)
            .fold((0.0, 0usize), |(s, n), (x, _)| (s + x.abs(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Diagnostics for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Mean absolute label score before this epoch's swaps.
    pub mean_abs_label_score: f64,
    /// Test fraction after this epoch's swaps.
    pub achieved_test_size: f64,
    pub num_swapped: usize,
}

/// Writes `epoch,mean_abs_label_score,achieved_test_size,num_swapped` rows
/// with a header line.
pub fn write_trace_csv(trace: &[EpochTrace], out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "epoch,mean_abs_label_score,achieved_test_size,num_swapped")?;
    for t in trace {
        writeln!(
            out,
            "{},{},{},{}",
            t.epoch, t.mean_abs_label_score, t.achieved_test_size, t.num_swapped
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StratifiedSplit {
    pub assignment: SplitAssignment,
    pub trace: Vec<EpochTrace>,
}

/// Runs the full swap-based sampler. Deterministic in `config.seed`.
pub fn stratified_split(dataset: &Dataset, config: &SamplerConfig) -> Result<StratifiedSplit> {
    config.validate()?;
    let n = dataset.num_points();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "stratified sampling needs at least 2 points, got {n}"
        )));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut assignment = initialize_split(n, config.target_test_size, &mut init_rng)?;
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let threshold_proportion = decay_schedule(config.threshold_proportion, config.decay, epoch);
        let swap_probability = decay_schedule(config.swap_probability, config.decay, epoch);
        let state = ScoreState::compute(
            dataset,
            &assignment,
            config.target_test_size,
            threshold_proportion,
        )?;
        let eligible = eligible_points(
            &state.point_score,
            threshold_proportion,
            &PointDraws::new(config.seed, TIE_STREAM | epoch as u64),
        );
        let num_swapped = swap_pass(
            &eligible,
            swap_probability,
            &PointDraws::new(config.seed, epoch as u64),
            &mut assignment,
        );
        trace.push(EpochTrace {
            epoch,
            mean_abs_label_score: state.mean_abs_label_score(dataset),
            achieved_test_size: assignment.test_fraction(),
            num_swapped,
        });
    }
    Ok(StratifiedSplit {
        assignment: assignment.with_seed(Some(config.seed)),
        trace,
    })
}
