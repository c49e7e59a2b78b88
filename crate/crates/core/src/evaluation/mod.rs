pub mod manifest;
pub mod metrics;
pub mod sampling;
pub mod split;

pub use manifest::{read_fold_manifest, read_pairs, write_fold_manifest, write_pairs, FoldManifest};
pub use metrics::{aggregate, auc_roc, average_precision, MetricReport, RelationScores, ScoredRelation, Scores};
pub use sampling::{sample_negatives_per_source, sample_negatives_with, NegativeSample};
pub use split::{
    build_fold, build_test_split, build_test_split_with_ratio, case_citations, date_buckets, law_citations,
    subsample_test_edges, time_cutoffs, Cutoff, EdgeSubsample, FoldPlan, RelationName, SplitConfig, TestSplit,
};
