//! Report rendering: JSON, long-format CSV, markdown tables and plot series.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, Stat};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
    PlotData,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 4] = [
        ReportFormat::Json,
        ReportFormat::Csv,
        ReportFormat::Markdown,
        ReportFormat::PlotData,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
            ReportFormat::PlotData => "plot_data.csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "markdown-table" | "md" => Ok(ReportFormat::Markdown),
            "plot-data" | "plot" => Ok(ReportFormat::PlotData),
            other => Err(Error::Format(format!(
                "unknown report format `{other}` (expected json, csv, markdown or plot-data)"
            ))),
        }
    }
}

/// One summary statistic of one cell; the CSV row type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub failures: usize,
}

/// Flattens summaries in a stable order: aggregate metrics, per-relation
/// metrics in target order, then timings.
pub fn summary_rows(report: &ExperimentReport) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for c in &report.cells {
        let s = &c.summary;
        let mut push = |metric: String, stat: Stat| {
            rows.push(SummaryRow {
                cell: c.cell.label.clone(),
                metric,
                mean: stat.mean,
                std: stat.std,
                runs: c.runs.len(),
                failures: c.failures.len(),
            })
        };
        push("micro_ap".into(), s.micro_ap);
        push("macro_ap".into(), s.macro_ap);
        push("micro_auc_roc".into(), s.micro_auc_roc);
        push("macro_auc_roc".into(), s.macro_auc_roc);
        for r in &s.relations {
            push(format!("ap:{}", r.relation), r.ap);
            push(format!("auc_roc:{}", r.relation), r.auc_roc);
        }
        push("train_seconds".into(), s.train_seconds);
        push("test_seconds".into(), s.test_seconds);
    }
    rows
}

pub fn write_summary_csv<W: std::io::Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["cell", "metric", "mean", "std", "runs", "failures"])?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: std::io::Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SummaryRow>, _>>()?)
}

fn pct(s: Stat) -> String {
    format!("{:.1} ± {:.2}", 100.0 * s.mean, 100.0 * s.std)
}

fn secs(s: Stat) -> String {
    format!("{:.1} ± {:.1}", s.mean, s.std)
}

/// Ablation-table layout: AP and AUC-ROC (micro, macro) in percent, then
/// test and train time in seconds.
pub fn markdown_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("| Variant | AP micro | AP macro | AUC-ROC micro | AUC-ROC macro | test time (s) | train time (s) | runs |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for c in &report.cells {
        let s = &c.summary;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            c.cell.label,
            pct(s.micro_ap),
            pct(s.macro_ap),
            pct(s.micro_auc_roc),
            pct(s.macro_auc_roc),
            secs(s.test_seconds),
            secs(s.train_seconds),
            c.runs.len()
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub metric: String,
    pub x: f64,
    pub y: f64,
    pub err: f64,
}

/// x/y/err series of macro metrics. Cells are grouped into series by their
/// label without the test-ratio term; x is the test ratio when swept and
/// the cell position otherwise.
pub fn plot_points(report: &ExperimentReport) -> Vec<PlotPoint> {
    let mut points = Vec::new();
    for metric in ["macro_ap", "macro_auc_roc"] {
        for (i, c) in report.cells.iter().enumerate() {
            let swept_ratio = c.cell.label.contains("test_ratio=");
            let series = c
                .cell
                .label
                .split(' ')
                .filter(|p| !p.starts_with("test_ratio="))
                .collect::<Vec<_>>()
                .join(" ");
            let stat = if metric == "macro_ap" {
                c.summary.macro_ap
            } else {
                c.summary.macro_auc_roc
            };
            points.push(PlotPoint {
                series,
                metric: metric.into(),
                x: if swept_ratio { c.cell.test_ratio } else { i as f64 },
                y: stat.mean,
                err: stat.std,
            });
        }
    }
    points
}

/// Renders `report` in `format` into `dir`; returns the written path.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            fs::write(&path, text)?;
        }
        ReportFormat::Csv => write_summary_csv(&summary_rows(report), fs::File::create(&path)?)?,
        ReportFormat::Markdown => fs::write(&path, markdown_table(report))?,
        ReportFormat::PlotData => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
            w.write_record(["series", "metric", "x", "y", "err"])?;
            for p in plot_points(report) {
                w.serialize(p)?;
            }
            w.flush()?;
        }
    }
    Ok(path)
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
