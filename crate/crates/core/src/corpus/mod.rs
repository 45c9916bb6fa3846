//! Review records, helpfulness labeling, balanced extraction and splits.

mod dataset;
mod io;
mod label;
mod record;
mod split;
mod stats;

pub use dataset::{
    build_labeled_set, build_unlabeled_pool, ClassBalance, CorpusEntry, Extraction, LabeledDataset, Reservoir,
    Shortfall, UnlabeledPool,
};
pub use io::{
    load_manifest, read_jsonl, read_reviews, write_jsonl, DatasetManifest, PrepareConfig, PreparedData,
    SplitCounts, MANIFEST_FILE, TEST_FILE, TRAIN_FILE, UNLABELED_FILE, VALIDATION_FILE,
};
pub use label::{assign_label, decide, helpfulness_ratio, DecisionTallies, FilterDecision, LabelConfig};
pub use record::{parse_review_record, Category, HelpfulnessLabel, ReviewRecord};
pub use split::{class_split_sizes, split_dataset, SplitSpec, Splits};
pub use stats::{corpus_stats, stats_from_totals, vote_bin, VoteBin, VotingDistributionReport, VOTE_BINS};
