//! Directed-acyclic-graph based sensor channel selection.
//!
//! The pipeline:
//!
//! 1. [`ranking`] scores every channel on its own with k-NN and orders the
//!    channels per task by class precision. Each task's best channel joins
//!    the root.
//! 2. [`dag`] compiles the rankings into a layered DAG: root, one layer per
//!    rank level, destination.
//! 3. [`confidence`] trains a subset model for every edge and path prefix.
//! 4. [`selection`] walks the DAG greedily per query and stops once the
//!    accumulated channels are confident enough.
//! 5. [`eval`] runs the walk over a test fold and reports accuracy and
//!    channel utilisation; [`synth`] generates datasets to run it on.

pub mod confidence;
pub mod dag;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod io;
pub mod knn;
pub mod model;
pub mod ranking;
pub mod selection;
pub mod split;
pub mod synth;

pub use confidence::{
    enumerate_model_keys, train_registry, Confidence, ConfidenceRegistry, ConfidenceSource,
    LazyRegistry, SubsetKey, TableConfidence, EPSILON,
};
pub use dag::{build_dag, enumerate_paths, DagPath, LayeredDag, Node};
pub use error::{Error, Result};
pub use eval::{full_channel_accuracy, run_baseline, run_experiment, AccuracyReport, EvalReport};
pub use knn::{knn_predict, KnnModel};
pub use model::{
    validate_dataset, ChannelId, ChannelReadings, Dataset, ReadingSource, RecordingReadings,
    Sample, TaskId, ValidationReport, Violation,
};
pub use ranking::{
    build_ranking_sets, evaluate_channel, rank_channels, ChannelRanking, ChannelScore,
    ClassifierConfig, PrecisionTable, RankingSet, RootMember, RootSet,
};
pub use selection::{
    dbcs_select, general_select, oracle_best_path, BestPrefix, OracleReport, SelectionResult,
    StopReason, Threshold,
};
pub use split::{split, Split, SplitSpec};
pub use synth::{generate_synthetic, SynthSpec};
