use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hge_core::enrichment::enrich;
use hge_core::evaluation::{build_fold, build_test_split, write_fold_manifest, FoldPlan, MetricReport};
use hge_core::harness::report::read_report_json;
use hge_core::harness::{
    emit_report, evaluate_models, generate_synthetic, load_dataset, run_experiment, train, ExperimentConfig,
    ReportFormat, SyntheticConfig, TrainOutput,
};
use hge_core::model::ModelParams;
use serde_json::json;

#[derive(Parser)]
#[command(name = "hge", version, about = "Heterogeneous graph link prediction for legal citation networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for splitting, initialization and sampling (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file (experiment config; synthetic config for `synth`)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Record wall-clock times in reports (makes them non-reproducible)
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted synthetic dataset bundle
    Synth {
        /// Generate the homophily-0 null variant
        #[arg(long)]
        null: bool,
    },
    /// Enrich a dataset and summarize the resulting graph
    Enrich {
        #[arg(long)]
        data: PathBuf,
    },
    /// Write the fold and test split manifests of a dataset
    Split {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train on one fold and write model checkpoints
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fold: usize,
    },
    /// Evaluate trained checkpoints on every test split of a fold
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fold: usize,
        /// Directory holding the checkpoints written by `train`
        #[arg(long)]
        models: PathBuf,
    },
    /// Run a full experiment and write the reports
    Run {
        #[arg(long)]
        data: PathBuf,
        /// Report formats to write (json, csv, markdown, plot-data); all when absent
        #[arg(long, value_delimiter = ',')]
        format: Vec<String>,
    },
    /// Render a JSON experiment report in another format
    Report {
        /// report.json written by `run`
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "markdown")]
        format: Vec<String>,
    },
}

/// Marks failures caused by invalid configuration or arguments.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigError(String);

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<hge_core::Error>() {
            return match e {
                hge_core::Error::Config(_) | hge_core::Error::Parameter(_) | hge_core::Error::Format(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())).into())
}

fn experiment_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = read_json(g.config.as_deref())?;
    if let Some(seed) = g.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.include_timings |= g.timings;
    cfg.validate()?;
    Ok(cfg)
}

fn formats(names: &[String]) -> Result<Vec<ReportFormat>> {
    if names.is_empty() {
        return Ok(ReportFormat::ALL.to_vec());
    }
    Ok(names.iter().map(|n| n.parse()).collect::<hge_core::Result<_>>()?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn fold_plan(data: &Path, fold: usize, cfg: &ExperimentConfig) -> Result<FoldPlan> {
    if !cfg.split.fold_indices().contains(&fold) {
        bail!(ConfigError(format!(
            "fold {fold} not in {}..{}",
            cfg.split.fold_indices().start,
            cfg.split.fold_indices().end
        )));
    }
    let g = load_dataset(data)?;
    Ok(build_fold(&g, fold, &cfg.split)?)
}

fn checkpoint_path(dir: &Path, fold: usize, k: usize) -> PathBuf {
    dir.join(format!("fold{fold}_model{k}.ckpt"))
}

fn models_path(dir: &Path, fold: usize) -> PathBuf {
    dir.join(format!("fold{fold}_models.json"))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    match &cli.command {
        Command::Synth { null } => {
            let mut cfg: SyntheticConfig = read_json(g.config.as_deref())?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            if *null {
                cfg = cfg.null();
            }
            let manifest = generate_synthetic(&cfg)?.save(&g.out)?;
            log::info!("wrote {:?} to {}", manifest.node_counts, g.out.display());
        }
        Command::Enrich { data } => {
            let cfg = experiment_config(g)?;
            let base = load_dataset(data)?;
            let enriched = enrich(&base, &cfg.train.enrichment)?;
            let relations: serde_json::Map<String, serde_json::Value> = enriched
                .relations()
                .iter()
                .map(|r| (enriched.relation_label(&r.id), json!(r.adjacency.nnz())))
                .collect();
            write_json(
                &g.out.join("enrichment.json"),
                &json!({ "node_counts": enriched.node_counts(), "edge_counts": relations }),
            )?;
        }
        Command::Split { data } => {
            let cfg = experiment_config(g)?;
            let graph = load_dataset(data)?;
            for k in cfg.split.fold_indices() {
                let fold = build_fold(&graph, k, &cfg.split)?;
                let splits = (0..cfg.split.n_test_splits)
                    .map(|s| build_test_split(&fold, s))
                    .collect::<hge_core::Result<Vec<_>>>()?;
                write_fold_manifest(&g.out, &fold, &splits)?;
            }
        }
        Command::Train { data, fold } => {
            let cfg = experiment_config(g)?;
            let plan = fold_plan(data, *fold, &cfg)?;
            let models = train(&plan, &cfg.train)?;
            let mut meta = Vec::new();
            for (k, m) in models.iter().enumerate() {
                let path = checkpoint_path(&g.out, *fold, k);
                m.params.write_checkpoint(BufWriter::new(File::create(&path)?))?;
                meta.push(json!({
                    "checkpoint": path.file_name().unwrap().to_string_lossy(),
                    "included": m.included,
                    "loss_history": m.loss_history,
                    "seconds": if cfg.include_timings { m.seconds } else { 0.0 },
                }));
            }
            write_json(&models_path(&g.out, *fold), &meta)?;
        }
        Command::Evaluate { data, fold, models } => {
            let cfg = experiment_config(g)?;
            let plan = fold_plan(data, *fold, &cfg)?;
            let meta: Vec<serde_json::Value> = serde_json::from_reader(BufReader::new(
                File::open(models_path(models, *fold)).context("reading model list")?,
            ))?;
            let mut trained = Vec::new();
            for (k, m) in meta.iter().enumerate() {
                let params = ModelParams::read_checkpoint(BufReader::new(File::open(checkpoint_path(models, *fold, k))?))?;
                let included: Vec<bool> = serde_json::from_value(m["included"].clone())?;
                if included.len() != plan.targets.len() {
                    bail!(ConfigError(format!("checkpoint {k} does not match the fold's targets")));
                }
                trained.push(TrainOutput {
                    params,
                    included,
                    loss_history: Vec::new(),
                    seconds: 0.0,
                });
            }
            let mut reports: Vec<MetricReport> = Vec::new();
            for s in 0..cfg.split.n_test_splits {
                let split = build_test_split(&plan, s)?;
                let mut report = evaluate_models(&trained, &plan, &split, &cfg.train)?;
                if !cfg.include_timings {
                    report.test_seconds = 0.0;
                }
                reports.push(report);
            }
            write_json(&g.out.join(format!("fold{fold}_metrics.json")), &reports)?;
        }
        Command::Run { data, format } => {
            let cfg = experiment_config(g)?;
            let formats = formats(format)?;
            let graph = load_dataset(data)?;
            let report = run_experiment(&graph, &cfg)?;
            for f in formats {
                emit_report(&report, f, &g.out)?;
            }
            let failures: usize = report.cells.iter().map(|c| c.failures.len()).sum();
            if failures > 0 {
                log::warn!("{failures} runs failed; see the report for details");
            }
        }
        Command::Report { input, format } => {
            let formats = formats(format)?;
            let report = read_report_json(input)?;
            for f in formats {
                emit_report(&report, f, &g.out)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
