//! Stratified train/test partitioning for extreme multi-label datasets.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod sampler;
pub mod synthetic;

pub use dataset::{
    actual_test_proportions, count_labels, Dataset, LabelCounts, LabelId, Partition,
    SplitAssignment,
};
pub use error::{Error, Result};
pub use sampler::{stratified_split, SamplerConfig, StratifiedSplit};
pub use metrics::{ReportOptions, SplitReport};
