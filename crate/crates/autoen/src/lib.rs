//! Ensemble-based AutoML over a predefined portfolio of preprocessing+classifier
//! pipelines, plus the cross-validation benchmark protocol used to evaluate it.
//!
//! The core workflow lives in [`ensemble`]: rank every portfolio pipeline by its
//! validation score, greedily grow a fixed-size ensemble with replacement from
//! the cached validation predictions, refit the unique members on
//! train+validation, and predict by uniform probability averaging. Everything
//! else supports that loop: [`dataset`] loads and partitions mixed-type CSV
//! data, [`preprocess`] and [`learners`] supply the pipeline building blocks,
//! [`metrics`] scores predictions, [`stats`] runs Friedman/Holm rank analysis
//! over method-by-dataset score tables, and [`bench`] drives ten-fold
//! cross-validation campaigns with baselines and report emission.

pub mod bench;
pub mod dataset;
pub mod ensemble;
pub mod fixtures;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod stats;

pub use dataset::{Dataset, FoldPlan, HoldoutSplit};
pub use ensemble::{AutoEnConfig, EconomyConfig, EnsembleModel};
pub use learners::{ClassifierSpec, ProbabilityMatrix};
pub use metrics::Metric;
pub use pipeline::{FittedPipeline, PipelineSpec, Portfolio};
pub use stats::{Direction, RankTable, ScoreTable};
