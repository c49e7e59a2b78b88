//! Training, experiments, dataset IO, synthetic data and reports.

pub mod dataset;
pub mod experiment;
pub mod report;
pub mod synthetic;
pub mod train;

pub use dataset::{load_dataset, DatasetBundle, DatasetManifest, EdgeRecord, NodeRecord};
pub use experiment::{
    run_experiment, Ablation, Cell, CellReport, ExperimentConfig, ExperimentReport, RunReport, Stat, Summary, Sweeps,
};
pub use report::{emit_report, markdown_table, plot_points, read_summary_csv, summary_rows, ReportFormat, SummaryRow};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use train::{default_enrichment, evaluate, evaluate_models, score_split, train, train_model, TrainConfig, TrainOutput};
