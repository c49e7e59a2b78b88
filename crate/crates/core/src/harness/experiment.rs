//! Experiment runner: folds × test splits × sweep cells, summarized as
//! mean and standard deviation per cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{evaluate_models, train, TrainConfig};
use crate::enrichment::EnrichmentSpec;
use crate::error::{Error, Result};
use crate::evaluation::{build_fold, build_test_split_with_ratio, MetricReport, SplitConfig};
use crate::graph::HeteroGraph;
use crate::model::EncoderVariant;

/// Model modifications studied in the ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoReverse,
    NoResidual,
    NoExposed,
    Homogeneous,
    /// No exposed features, reverse edges or self-loops.
    NoEnrichment,
}

impl Ablation {
    pub const TABLE: [Ablation; 5] = [
        Ablation::Full,
        Ablation::NoReverse,
        Ablation::NoResidual,
        Ablation::NoExposed,
        Ablation::Homogeneous,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoReverse => "no_reverse",
            Ablation::NoResidual => "no_residual",
            Ablation::NoExposed => "no_exposed",
            Ablation::Homogeneous => "homogeneous",
            Ablation::NoEnrichment => "no_enrichment",
        }
    }

    /// Returns `cfg` with exactly this component removed.
    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut out = cfg.clone();
        match self {
            Ablation::Full => {}
            Ablation::NoReverse => out.enrichment.add_reverse = false,
            Ablation::NoResidual => out.encoder.use_residual = false,
            Ablation::NoExposed => out.enrichment.meta_features.clear(),
            Ablation::Homogeneous => out.encoder.homogenize = true,
            Ablation::NoEnrichment => out.enrichment = EnrichmentSpec::none(),
        }
        out
    }
}

fn variant_name(v: EncoderVariant) -> &'static str {
    match v {
        EncoderVariant::Hge => "hge",
        EncoderVariant::Rgcn => "rgcn",
        EncoderVariant::Gcn => "gcn",
    }
}

/// Optional sweep axes; each present axis must be non-empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweeps {
    pub ablation: Option<Vec<Ablation>>,
    pub variant: Option<Vec<EncoderVariant>>,
    pub joint: Option<Vec<bool>>,
    pub cumulative_train: Option<Vec<bool>>,
    pub cumulative_test: Option<Vec<bool>>,
    pub test_ratio: Option<Vec<f64>>,
}

impl Sweeps {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("ablation", self.ablation.as_ref().map(Vec::len)),
            ("variant", self.variant.as_ref().map(Vec::len)),
            ("joint", self.joint.as_ref().map(Vec::len)),
            ("cumulative_train", self.cumulative_train.as_ref().map(Vec::len)),
            ("cumulative_test", self.cumulative_test.as_ref().map(Vec::len)),
            ("test_ratio", self.test_ratio.as_ref().map(Vec::len)),
        ];
        for (name, len) in axes {
            if len == Some(0) {
                return Err(Error::Config(format!("sweep axis `{name}` is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub sweeps: Sweeps,
    /// Restrict to these folds; all folds when absent.
    pub folds: Option<Vec<usize>>,
    /// Record wall-clock times. Off by default so that reports of equal
    /// configurations are byte-identical.
    pub include_timings: bool,
}

impl ExperimentConfig {
    /// Sets the seed of both splitting and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.train.validate()?;
        self.sweeps.validate()?;
        if let Some(ratios) = &self.sweeps.test_ratio {
            for &r in ratios {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::Config(format!("swept test ratio {r} not in [0, 1]")));
                }
            }
        }
        if let Some(folds) = &self.folds {
            if folds.is_empty() {
                return Err(Error::Config("empty fold list".into()));
            }
            for &k in folds {
                if !self.split.fold_indices().contains(&k) {
                    return Err(Error::Config(format!("fold {k} outside 1..{}", self.split.n_folds)));
                }
            }
        }
        Ok(())
    }

    fn fold_list(&self) -> Vec<usize> {
        self.folds.clone().unwrap_or_else(|| self.split.fold_indices().collect())
    }

    /// Sweep cells in a fixed order: ablation, variant, joint, cumulative
    /// train, cumulative test, test ratio.
    pub fn cells(&self) -> Vec<Cell> {
        let s = &self.sweeps;
        let one = |v: Option<&Vec<bool>>, d: bool| v.cloned().unwrap_or_else(|| vec![d]);
        let mut cells = Vec::new();
        for &ablation in s.ablation.as_deref().unwrap_or(&[Ablation::Full]) {
            for &variant in s.variant.as_deref().unwrap_or(&[self.train.encoder.variant]) {
                for joint in one(s.joint.as_ref(), self.train.joint) {
                    for ct in one(s.cumulative_train.as_ref(), self.split.cumulative_train) {
                        for cs in one(s.cumulative_test.as_ref(), self.split.cumulative_test) {
                            for &ratio in s.test_ratio.as_deref().unwrap_or(&[self.split.test_ratio]) {
                                let mut parts = vec![variant_name(variant).to_string()];
                                if s.ablation.is_some() {
                                    parts.push(ablation.name().to_string());
                                }
                                if s.joint.is_some() {
                                    parts.push(if joint { "joint" } else { "separate" }.to_string());
                                }
                                if s.cumulative_train.is_some() {
                                    parts.push(format!("cumulative_train={ct}"));
                                }
                                if s.cumulative_test.is_some() {
                                    parts.push(format!("cumulative_test={cs}"));
                                }
                                if s.test_ratio.is_some() {
                                    parts.push(format!("test_ratio={ratio}"));
                                }
                                cells.push(Cell {
                                    label: parts.join(" "),
                                    ablation,
                                    variant,
                                    joint,
                                    cumulative_train: ct,
                                    cumulative_test: cs,
                                    test_ratio: ratio,
                                });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Training configuration of a cell.
    pub fn cell_train_config(&self, cell: &Cell) -> TrainConfig {
        let mut cfg = self.train.clone();
        if cell.variant != cfg.encoder.variant {
            let sizes = cfg.encoder.layer_sizes.clone();
            let placement = cfg.encoder.dropout_placement;
            cfg.encoder = match cell.variant {
                EncoderVariant::Hge => crate::model::EncoderConfig::hge(sizes),
                EncoderVariant::Rgcn => crate::model::EncoderConfig::rgcn(sizes),
                EncoderVariant::Gcn => crate::model::EncoderConfig::gcn(sizes),
            };
            cfg.encoder.dropout_placement = placement;
        }
        cfg.joint = cell.joint;
        cell.ablation.apply(&cfg)
    }

    pub fn cell_split_config(&self, cell: &Cell) -> SplitConfig {
        SplitConfig {
            cumulative_train: cell.cumulative_train,
            cumulative_test: cell.cumulative_test,
            test_ratio: cell.test_ratio,
            ..self.split.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub ablation: Ablation,
    pub variant: EncoderVariant,
    pub joint: bool,
    pub cumulative_train: bool,
    pub cumulative_test: bool,
    pub test_ratio: f64,
}

impl Cell {
    /// Cells that differ only in test ratio share trained models.
    fn training_key(&self) -> (Ablation, EncoderVariant, bool, bool, bool) {
        (self.ablation, self.variant, self.joint, self.cumulative_train, self.cumulative_test)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation; zero spread for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSummary {
    pub relation: String,
    pub ap: Stat,
    pub auc_roc: Stat,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub micro_ap: Stat,
    pub macro_ap: Stat,
    pub micro_auc_roc: Stat,
    pub macro_auc_roc: Stat,
    pub relations: Vec<RelationSummary>,
    pub train_seconds: Stat,
    pub test_seconds: Stat,
}

impl Summary {
    pub fn of(reports: &[MetricReport]) -> Self {
        let stat = |f: &dyn Fn(&MetricReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
        let mut names: Vec<String> = Vec::new();
        for r in reports {
            for rel in &r.relations {
                if !names.contains(&rel.relation) {
                    names.push(rel.relation.clone());
                }
            }
        }
        let relations = names
            .into_iter()
            .map(|name| {
                let rows: Vec<_> = reports.iter().filter_map(|r| r.relation(&name)).collect();
                RelationSummary {
                    ap: Stat::of(&rows.iter().map(|r| r.ap).collect::<Vec<_>>()),
                    auc_roc: Stat::of(&rows.iter().map(|r| r.auc_roc).collect::<Vec<_>>()),
                    relation: name,
                }
            })
            .collect();
        Self {
            micro_ap: stat(&|r| r.micro.ap),
            macro_ap: stat(&|r| r.macro_.ap),
            micro_auc_roc: stat(&|r| r.micro.auc_roc),
            macro_auc_roc: stat(&|r| r.macro_.auc_roc),
            relations,
            train_seconds: stat(&|r| r.train_seconds),
            test_seconds: stat(&|r| r.test_seconds),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fold: usize,
    pub split: usize,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub fold: usize,
    pub split: Option<usize>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    pub summary: Summary,
    pub runs: Vec<RunReport>,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
}

struct Job {
    key_cell: usize,
    fold: usize,
}

type JobResult = Vec<(usize, usize, std::result::Result<RunReport, Failure>)>;

fn run_job(g: &HeteroGraph, cfg: &ExperimentConfig, cells: &[Cell], job: &Job) -> JobResult {
    let key = cells[job.key_cell].training_key();
    let members: Vec<usize> = (0..cells.len()).filter(|&c| cells[c].training_key() == key).collect();
    let base = &cells[job.key_cell];
    let tcfg = cfg.cell_train_config(base);
    let fail_all = |e: Error| -> JobResult {
        members
            .iter()
            .map(|&c| {
                (
                    c,
                    job.fold,
                    Err(Failure {
                        fold: job.fold,
                        split: None,
                        error: e.to_string(),
                    }),
                )
            })
            .collect()
    };
    let fold = match build_fold(g, job.fold, &cfg.cell_split_config(base)) {
        Ok(f) => f,
        Err(e) => return fail_all(e),
    };
    let models = match train(&fold, &tcfg) {
        Ok(m) => m,
        Err(e) => return fail_all(e),
    };
    let mut out = Vec::new();
    for &c in &members {
        for split in 0..cfg.split.n_test_splits {
            let result = build_test_split_with_ratio(&fold, split, cells[c].test_ratio)
                .and_then(|s| evaluate_models(&models, &fold, &s, &tcfg))
                .map(|mut report| {
                    if !cfg.include_timings {
                        report.train_seconds = 0.0;
                        report.test_seconds = 0.0;
                    }
                    RunReport {
                        fold: job.fold,
                        split,
                        report,
                    }
                })
                .map_err(|e| Failure {
                    fold: job.fold,
                    split: Some(split),
                    error: e.to_string(),
                });
            out.push((c, job.fold, result));
        }
    }
    out
}

/// Runs every (cell, fold, test split). Models are trained once per fold and
/// training-relevant cell, and shared by cells differing only in test ratio.
/// Failures are recorded per cell and do not stop the run.
pub fn run_experiment(g: &HeteroGraph, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells = cfg.cells();
    let mut jobs = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let first = cells.iter().position(|o| o.training_key() == cell.training_key()) == Some(c);
        if first {
            for k in cfg.fold_list() {
                jobs.push(Job { key_cell: c, fold: k });
            }
        }
    }
    let results: Vec<JobResult> = jobs.par_iter().map(|j| run_job(g, cfg, &cells, j)).collect();

    let mut reports: Vec<CellReport> = cells
        .into_iter()
        .map(|cell| CellReport {
            cell,
            summary: Summary::default(),
            runs: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for (c, _, r) in results.into_iter().flatten() {
        match r {
            Ok(run) => reports[c].runs.push(run),
            Err(f) => {
                log::warn!("cell `{}` fold {}: {}", reports[c].cell.label, f.fold, f.error);
                reports[c].failures.push(f);
            }
        }
    }
    for r in &mut reports {
        r.runs.sort_by_key(|run| (run.fold, run.split));
        r.failures.sort_by_key(|f| (f.fold, f.split));
        let metrics: Vec<MetricReport> = r.runs.iter().map(|run| run.report.clone()).collect();
        r.summary = Summary::of(&metrics);
    }
    Ok(ExperimentReport { cells: reports })
}
