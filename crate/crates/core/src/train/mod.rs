//! Experiment drivers: batching, the training loop with validation-based
//! selection, evaluation, reports and report comparison.

mod batch;
mod config;
mod experiment;
mod report;
mod trainer;

pub use batch::make_batches;
pub use config::{PretrainConfig, Task, TrainConfig};
pub use experiment::{
    evaluate_model, pretrain_embeddings, pretraining_corpus, run_experiment_t1, run_experiment_t2, table_digest,
    tokenize_entries, ExperimentOutcome, Pretrained, Provenance,
};
pub use report::{
    compare_reports, CategoryReport, Comparison, ComparisonRow, DataHashes, ExperimentReport, ReferenceResult,
    Timing, REPORT_SCHEMA_VERSION,
};
pub use trainer::{
    evaluate, evaluate_svm, train_model, ClassCounts, ConfusionMatrix, EpochRecord, Evaluation, TrainOutcome,
    GRAD_SHARDS,
};
