//! In-memory multi-label dataset, train/test assignments and per-label tallies.
//!
//! Label sets are stored in a flat CSR layout (`offsets` into one `labels`
//! array) so that the per-epoch counting pass in the samplers is a single
//! sweep over contiguous memory.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type LabelId = u32;

/// Minimum number of points handled by one counting shard.
const COUNT_SHARD_LEN: usize = 4096;

/// Byte ranges of one point's source line inside [`Dataset`]'s text buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LineSpan {
    start: usize,
    features_at: usize,
    end: usize,
}

/// A multi-label dataset: per-point label sets plus the verbatim source line
/// of every point, so that splits can be written back byte-for-byte.
///
/// Immutable after construction. Label ids are dense in `[0, num_labels)`;
/// a label id may have zero instances, in which case it is *absent* and is
/// ignored by every metric denominator.
#[derive(Clone, PartialEq, Eq)]
pub struct Dataset {
    num_labels: usize,
    num_features: usize,
    offsets: Vec<usize>,
    labels: Vec<LabelId>,
    label_frequency: Vec<u32>,
    text: String,
    spans: Vec<LineSpan>,
}

impl fmt::Debug for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dataset")
            .field("num_points", &self.num_points())
            .field("num_labels", &self.num_labels)
            .field("num_features", &self.num_features)
            .field("num_instances", &self.labels.len())
            .finish()
    }
}

/// Incremental builder used by the parser and by the in-memory constructors.
pub(crate) struct DatasetBuilder {
    num_labels: usize,
    num_features: usize,
    offsets: Vec<usize>,
    labels: Vec<LabelId>,
    label_frequency: Vec<u32>,
    text: String,
    spans: Vec<LineSpan>,
}

impl DatasetBuilder {
    pub(crate) fn new(num_labels: usize, num_features: usize, capacity: usize) -> Self {
        let mut offsets = Vec::with_capacity(capacity + 1);
        offsets.push(0);
        Self {
            num_labels,
            num_features,
            offsets,
            labels: Vec::new(),
            label_frequency: vec![0; num_labels],
            text: String::new(),
            spans: Vec::with_capacity(capacity),
        }
    }

    /// Appends a point. `labels` must already be sorted, deduplicated and in
    /// range; `line` is the verbatim source line and `features_at` the byte
    /// offset in it where the feature payload starts.
    pub(crate) fn push_line(&mut self, labels: &[LabelId], line: &str, features_at: usize) {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        for &l in labels {
            self.label_frequency[l as usize] += 1;
        }
        self.labels.extend_from_slice(labels);
        self.offsets.push(self.labels.len());
        let start = self.text.len();
        self.text.push_str(line);
        self.spans.push(LineSpan {
            start,
            features_at: start + features_at,
            end: self.text.len(),
        });
    }

    pub(crate) fn finish(self) -> Dataset {
        Dataset {
            num_labels: self.num_labels,
            num_features: self.num_features,
            offsets: self.offsets,
            labels: self.labels,
            label_frequency: self.label_frequency,
            text: self.text,
            spans: self.spans,
        }
    }
}

/// Sorts and deduplicates `labels` in place and checks the vocabulary bound.
fn normalize_label_set(labels: &mut Vec<LabelId>, num_labels: usize, point: usize) -> Result<()> {
    labels.sort_unstable();
    labels.dedup();
    if let Some(&max) = labels.last() {
        if max as usize >= num_labels {
            return Err(Error::InvalidArgument(format!(
                "point {point}: label id {max} is not below num_labels {num_labels}"
            )));
        }
    }
    Ok(())
}

impl Dataset {
    /// Builds a dataset from per-point label lists with empty feature payloads.
    pub fn from_label_sets(num_labels: usize, label_sets: Vec<Vec<LabelId>>) -> Result<Self> {
        let payloads = vec![String::new(); label_sets.len()];
        Self::with_payloads(num_labels, 0, label_sets, payloads)
    }

    /// Builds a dataset from per-point label lists and feature payloads.
    ///
    /// Label lists are sorted and deduplicated. Each point's source line is
    /// synthesized in repository format (`l1,l2 payload`).
    pub fn with_payloads(
        num_labels: usize,
        num_features: usize,
        label_sets: Vec<Vec<LabelId>>,
        payloads: Vec<String>,
    ) -> Result<Self> {
        if label_sets.len() != payloads.len() {
            return Err(Error::InvalidArgument(format!(
                "{} label sets but {} payloads",
                label_sets.len(),
                payloads.len()
            )));
        }
        let mut builder = DatasetBuilder::new(num_labels, num_features, label_sets.len());
        let mut line = String::new();
        for (point, (mut labels, payload)) in label_sets.into_iter().zip(payloads).enumerate() {
            normalize_label_set(&mut labels, num_labels, point)?;
            if payload.contains('\n') {
                return Err(Error::InvalidArgument(format!(
                    "point {point}: payload contains a line break"
                )));
            }
            line.clear();
            for (i, l) in labels.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&l.to_string());
            }
            if !labels.is_empty() && !payload.is_empty() {
                line.push(' ');
            }
            let features_at = line.len();
            line.push_str(&payload);
            builder.push_line(&labels, &line, features_at);
        }
        Ok(builder.finish())
    }

    pub fn num_points(&self) -> usize {
        self.spans.len()
    }

    /// Size of the label vocabulary, including absent labels.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Sorted, duplicate-free label ids of `point`.
    #[inline]
    pub fn labels_of(&self, point: usize) -> &[LabelId] {
        &self.labels[self.offsets[point]..self.offsets[point + 1]]
    }

    /// Instance count of every label over the whole dataset.
    pub fn label_frequency(&self) -> &[u32] {
        &self.label_frequency
    }

    /// Total number of (point, label) pairs.
    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    /// Labels with at least one instance.
    pub fn num_present_labels(&self) -> usize {
        self.label_frequency.iter().filter(|&&f| f > 0).count()
    }

    pub fn is_present(&self, label: LabelId) -> bool {
        self.label_frequency[label as usize] > 0
    }

    /// Verbatim feature payload of `point` (everything after the label block).
    pub fn feature_payload(&self, point: usize) -> &str {
        let span = self.spans[point];
        &self.text[span.features_at..span.end]
    }

    /// Verbatim source line of `point`, without its line terminator.
    pub fn line(&self, point: usize) -> &str {
        let span = self.spans[point];
        &self.text[span.start..span.end]
    }

    /// Iterator over `(point, labels)` pairs.
    pub fn iter_label_sets(&self) -> impl ExactSizeIterator<Item = &[LabelId]> + '_ {
        (0..self.num_points()).map(move |i| self.labels_of(i))
    }

    /// Concatenates two datasets sharing a label vocabulary, returning the
    /// merged dataset and the assignment that marks the points of `test`.
    ///
    /// This is how a repository-provided train/test pair is turned into one
    /// dataset plus its provided split.
    pub fn concat_split(train: &Dataset, test: &Dataset) -> Result<(Dataset, SplitAssignment)> {
        if train.num_labels != test.num_labels {
            return Err(Error::InvalidArgument(format!(
                "train has {} labels but test has {}",
                train.num_labels, test.num_labels
            )));
        }
        let num_features = train.num_features.max(test.num_features);
        let n = train.num_points() + test.num_points();
        let mut builder = DatasetBuilder::new(train.num_labels, num_features, n);
        for part in [train, test] {
            for i in 0..part.num_points() {
                let span = part.spans[i];
                builder.push_line(
                    part.labels_of(i),
                    part.line(i),
                    span.features_at - span.start,
                );
            }
        }
        let mut partition_of = vec![Partition::Train; train.num_points()];
        partition_of.resize(n, Partition::Test);
        Ok((builder.finish(), SplitAssignment::new(partition_of, None)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Partition::Train => Partition::Test,
            Partition::Test => Partition::Train,
        }
    }

    #[inline]
    pub fn is_test(self) -> bool {
        self == Partition::Test
    }
}

/// Per-point partition flags, plus the seed that produced them when the
/// assignment came from a seeded sampler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    partition_of: Vec<Partition>,
    seed: Option<u64>,
}

impl SplitAssignment {
    pub fn new(partition_of: Vec<Partition>, seed: Option<u64>) -> Self {
        Self { partition_of, seed }
    }

    pub fn all(num_points: usize, partition: Partition) -> Self {
        Self::new(vec![partition; num_points], None)
    }

    pub fn len(&self) -> usize {
        self.partition_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition_of.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    #[inline]
    pub fn get(&self, point: usize) -> Partition {
        self.partition_of[point]
    }

    #[inline]
    pub fn is_test(&self, point: usize) -> bool {
        self.partition_of[point].is_test()
    }

    pub fn set(&mut self, point: usize, partition: Partition) {
        self.partition_of[point] = partition;
    }

    pub fn flip(&mut self, point: usize) {
        self.partition_of[point] = self.partition_of[point].flipped();
    }

    pub fn as_slice(&self) -> &[Partition] {
        &self.partition_of
    }

    pub fn test_count(&self) -> usize {
        self.partition_of.iter().filter(|p| p.is_test()).count()
    }

    pub fn train_count(&self) -> usize {
        self.len() - self.test_count()
    }

    /// Fraction of points in TEST; 0 for an empty assignment.
    pub fn test_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.test_count() as f64 / self.len() as f64
        }
    }

    /// Indices of the points in `partition`, in ascending order.
    pub fn indices_of(&self, partition: Partition) -> Vec<usize> {
        self.partition_of
            .iter()
            .enumerate()
            .filter_map(|(i, &p)| (p == partition).then_some(i))
            .collect()
    }

    pub(crate) fn check_matches(&self, dataset: &Dataset) -> Result<()> {
        if self.len() != dataset.num_points() {
            return Err(Error::InvalidArgument(format!(
                "assignment covers {} points but the dataset has {}",
                self.len(),
                dataset.num_points()
            )));
        }
        Ok(())
    }
}

/// Per-label instance tallies in each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCounts {
    pub train_count: Vec<u32>,
    pub test_count: Vec<u32>,
}

impl LabelCounts {
    pub fn num_labels(&self) -> usize {
        self.test_count.len()
    }

    #[inline]
    pub fn total(&self, label: usize) -> u32 {
        self.train_count[label] + self.test_count[label]
    }

    pub fn count_in(&self, label: usize, partition: Partition) -> u32 {
        match partition {
            Partition::Train => self.train_count[label],
            Partition::Test => self.test_count[label],
        }
    }

    /// Fraction of `label`'s instances currently in TEST.
    ///
    /// Fails for a label with no instances at all.
    pub fn test_proportion(&self, label: usize) -> Result<f64> {
        match self.total(label) {
            0 => Err(Error::InvalidArgument(format!(
                "label {label} has no instances"
            ))),
            total => Ok(self.test_count[label] as f64 / total as f64),
        }
    }
}

/// Tallies every label's instances in TRAIN and TEST.
///
/// Sharded over points when the dataset is large; integer tallies make the
/// merged result identical to the sequential pass.
pub fn count_labels(dataset: &Dataset, assignment: &SplitAssignment) -> Result<LabelCounts> {
    assignment.check_matches(dataset)?;
    let num_labels = dataset.num_labels();
    let test_count = (0..dataset.num_points())
        .into_par_iter()
        .with_min_len(COUNT_SHARD_LEN)
        .fold(
            || vec![0u32; num_labels],
            |mut acc, point| {
                if assignment.is_test(point) {
                    for &l in dataset.labels_of(point) {
                        acc[l as usize] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; num_labels],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let train_count = dataset
        .label_frequency()
        .iter()
        .zip(&test_count)
        .map(|(&total, &test)| total - test)
        .collect();
    Ok(LabelCounts {
        train_count,
        test_count,
    })
}

/// Test proportion of every label; `None` for labels absent from the dataset.
pub fn actual_test_proportions(counts: &LabelCounts) -> Vec<Option<f64>> {
    (0..counts.num_labels())
        .map(|l| counts.test_proportion(l).ok())
        .collect()
}
