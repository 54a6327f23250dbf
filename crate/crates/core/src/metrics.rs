//! Split quality metrics: KL divergence of the test label distribution from
//! the full one, missing-label fractions, label test-proportion histograms
//! and dataset statistics.
//!
//! Labels absent from the whole dataset are excluded from every denominator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{count_labels, Dataset, LabelCounts, Partition, SplitAssignment};
use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_NUM_BINS: usize = 10;
/// Labels with fewer instances than this are tail labels.
pub const DEFAULT_TAIL_THRESHOLD: u32 = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

/// `KL(test || full)` in nats over label-instance distributions; labels with
/// no test instances contribute 0.
pub fn kl_divergence(dataset: &Dataset, assignment: &SplitAssignment) -> Result<f64> {
    let counts = count_labels(dataset, assignment)?;
    kl_from_counts(&counts)
}

pub fn kl_from_counts(counts: &LabelCounts) -> Result<f64> {
    let full_total: u64 = (0..counts.num_labels()).map(|l| counts.total(l) as u64).sum();
    let test_total: u64 = counts.test_count.iter().map(|&c| c as u64).sum();
    if test_total == 0 {
        return Err(Error::UndefinedMetric(
            "test partition holds no label instances".into(),
        ));
    }
    let (full_total, test_total) = (full_total as f64, test_total as f64);
    let kl = (0..counts.num_labels())
        .filter(|&l| counts.test_count[l] > 0)
        .map(|l| {
            let q = counts.test_count[l] as f64 / test_total;
            let p = counts.total(l) as f64 / full_total;
            q * (q / p).ln()
        })
        .sum::<f64>();
    // Rounding can leave a tiny negative value for identical distributions.
    Ok(kl.max(0.0))
}

/// `KL(full || test)` with `epsilon` added to every present label's test
/// count, so that labels missing from TEST stay finite.
pub fn smoothed_reverse_kl(counts: &LabelCounts, epsilon: f64) -> Result<f64> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "smoothing must be positive, got {epsilon}"
        )));
    }
    let present: Vec<usize> = (0..counts.num_labels())
        .filter(|&l| counts.total(l) > 0)
        .collect();
    if present.is_empty() {
        return Err(Error::UndefinedMetric("dataset has no label instances".into()));
    }
    let full_total: f64 = present.iter().map(|&l| counts.total(l) as f64).sum();
    let test_total: f64 = present
        .iter()
        .map(|&l| counts.test_count[l] as f64 + epsilon)
        .sum();
    let kl = present
        .iter()
        .map(|&l| {
            let p = counts.total(l) as f64 / full_total;
            let q = (counts.test_count[l] as f64 + epsilon) / test_total;
            p * (p / q).ln()
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Fraction of present labels with no instance in `partition`.
pub fn missing_label_fraction(counts: &LabelCounts, partition: Partition) -> f64 {
    let (missing, present) = (0..counts.num_labels())
        .filter(|&l| counts.total(l) > 0)
        .fold((0usize, 0usize), |(m, p), l| {
            (m + (counts.count_in(l, partition) == 0) as usize, p + 1)
        });
    if present == 0 {
        0.0
    } else {
        missing as f64 / present as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub head_count: usize,
    pub tail_count: usize,
    pub head_frac: f64,
    pub tail_frac: f64,
}

/// Distribution of per-label test proportions over equal-width bins on
/// `[0, 1]`, split into head and tail labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionHistogram {
    pub bins: Vec<HistogramBin>,
    pub tail_threshold: u32,
    /// Test fraction of the whole split, the value a perfectly stratified
    /// split would put every label at.
    pub reference_test_size: f64,
}

impl ProportionHistogram {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.head_count + b.tail_count).sum()
    }

    /// Fraction of labels in bin `i`, head and tail together.
    pub fn bin_fraction(&self, i: usize) -> f64 {
        self.bins[i].head_frac + self.bins[i].tail_frac
    }

    /// Writes `bin_low,bin_high,head_count,tail_count,head_frac,tail_frac`
    /// rows with a header line.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "bin_low,bin_high,head_count,tail_count,head_frac,tail_frac")?;
        for b in &self.bins {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                b.low, b.high, b.head_count, b.tail_count, b.head_frac, b.tail_frac
            )?;
        }
        Ok(())
    }
}

/// Bin of a label with `test` of its `total` instances in TEST. Bins are
/// `[i/k, (i+1)/k)` with the last one closed at 1.
#[inline]
pub fn proportion_bin(test: u32, total: u32, num_bins: usize) -> usize {
    debug_assert!(total > 0 && test <= total);
    ((test as u64 * num_bins as u64 / total as u64) as usize).min(num_bins - 1)
}

pub fn proportion_histogram(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    num_bins: usize,
    tail_threshold: u32,
) -> Result<ProportionHistogram> {
    let counts = count_labels(dataset, assignment)?;
    histogram_from_counts(&counts, num_bins, tail_threshold, assignment.test_fraction())
}

pub fn histogram_from_counts(
    counts: &LabelCounts,
    num_bins: usize,
    tail_threshold: u32,
    reference_test_size: f64,
) -> Result<ProportionHistogram> {
    if num_bins == 0 {
        return Err(Error::InvalidArgument("num_bins must be positive".into()));
    }
    let mut head = vec![0usize; num_bins];
    let mut tail = vec![0usize; num_bins];
    let mut present = 0usize;
    for l in 0..counts.num_labels() {
        let total = counts.total(l);
        if total == 0 {
            continue;
        }
        present += 1;
        let bin = proportion_bin(counts.test_count[l], total, num_bins);
        if total >= tail_threshold {
            head[bin] += 1;
        } else {
            tail[bin] += 1;
        }
    }
    let frac = |c: usize| if present == 0 { 0.0 } else { c as f64 / present as f64 };
    let bins = (0..num_bins)
        .map(|i| HistogramBin {
            low: i as f64 / num_bins as f64,
            high: (i + 1) as f64 / num_bins as f64,
            head_count: head[i],
            tail_count: tail[i],
            head_frac: frac(head[i]),
            tail_frac: frac(tail[i]),
        })
        .collect();
    Ok(ProportionHistogram {
        bins,
        tail_threshold,
        reference_test_size,
    })
}

/// Dataset-level statistics. Averages and the tail share are over the full
/// dataset; the point counts come from the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Labels with at least one instance.
    pub num_labels: usize,
    /// Declared vocabulary size, present or not.
    pub vocabulary_size: usize,
    pub num_train: usize,
    pub num_test: usize,
    pub avg_labels_per_sample: f64,
    pub avg_samples_per_label: f64,
    pub tail_label_fraction: f64,
}

pub fn dataset_stats(
    dataset: &Dataset,
    assignment: &SplitAssignment,
    tail_threshold: u32,
) -> Result<DatasetStats> {
    if assignment.len() != dataset.num_points() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} points but the dataset has {}",
            assignment.len(),
            dataset.num_points()
        )));
    }
    let instances = dataset.num_instances() as f64;
    let present = dataset.num_present_labels();
    let tail = dataset
        .label_frequency()
        .iter()
        .filter(|&&f| f > 0 && f < tail_threshold)
        .count();
    let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
    Ok(DatasetStats {
        num_labels: present,
        vocabulary_size: dataset.num_labels(),
        num_train: assignment.train_count(),
        num_test: assignment.test_count(),
        avg_labels_per_sample: ratio(instances, dataset.num_points()),
        avg_samples_per_label: ratio(instances, present),
        tail_label_fraction: ratio(tail as f64, present),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub num_bins: usize,
    pub tail_threshold: u32,
    /// Additive smoothing for the reverse-direction KL reported alongside
    /// the primary one.
    pub smoothing: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_NUM_BINS,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

/// Everything known about one split, serialized as the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub kl_divergence: f64,
    /// `KL(full || test)` with additive smoothing.
    pub kl_smoothed_reverse: f64,
    pub smoothing: f64,
    pub missing_from_test: f64,
    pub missing_from_train: f64,
    /// `missing_from_test` as a percentage rounded to one decimal.
    pub missing_from_test_pct: String,
    pub achieved_test_size: f64,
    pub histogram: ProportionHistogram,
    pub dataset_stats: DatasetStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_secs: Option<f64>,
}

/// One decimal place, the way percentages are tabulated.
pub fn format_pct(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

impl SplitReport {
    pub fn evaluate(
        dataset: &Dataset,
        assignment: &SplitAssignment,
        options: &ReportOptions,
    ) -> Result<Self> {
        if assignment.test_count() == 0 {
            return Err(Error::UndefinedMetric("test partition is empty".into()));
        }
        let counts = count_labels(dataset, assignment)?;
        let missing_from_test = missing_label_fraction(&counts, Partition::Test);
        Ok(Self {
            schema_version: REPORT_SCHEMA_VERSION,
            method: None,
            seed: assignment.seed(),
            kl_divergence: kl_from_counts(&counts)?,
            kl_smoothed_reverse: smoothed_reverse_kl(&counts, options.smoothing)?,
            smoothing: options.smoothing,
            missing_from_test,
            missing_from_train: missing_label_fraction(&counts, Partition::Train),
            missing_from_test_pct: format_pct(missing_from_test),
            achieved_test_size: assignment.test_fraction(),
            histogram: histogram_from_counts(
                &counts,
                options.num_bins,
                options.tail_threshold,
                assignment.test_fraction(),
            )?,
            dataset_stats: dataset_stats(dataset, assignment, options.tail_threshold)?,
            wall_secs: None,
        })
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = Some(method.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
