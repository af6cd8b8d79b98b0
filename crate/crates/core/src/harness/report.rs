use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use crate::classifiers::{format_assignment, Algorithm, Assignment};
use crate::error::{Error, Result};
use crate::ingest::IngestReport;
use crate::metrics::MetricSet;
use crate::model_select::SearchResult;
use crate::preprocess::PreprocessReport;

pub const REPORT_CSV: &str = "report.csv";
pub const TIMING_CSV: &str = "timing.csv";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_JSON: &str = "report.json";

/// Monotonic-clock measurements for one report row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub fit_seconds: f64,
    pub predict_total_seconds: f64,
    /// `predict_total_seconds` divided by the number of test rows.
    pub predict_per_instance_seconds: f64,
    /// Empty for scenarios that skip preprocessing.
    pub preprocess_stage_seconds: IndexMap<String, f64>,
    /// Wall time of the grid search, when one ran.
    pub search_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSource {
    Default,
    Grid,
}

impl ParamSource {
    pub fn id(self) -> &'static str {
        match self {
            ParamSource::Default => "default",
            ParamSource::Grid => "grid",
        }
    }
}

/// One (slice, algorithm, scenario) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub slice: String,
    pub algorithm: Algorithm,
    pub scenario: Scenario,
    pub metrics: MetricSet,
    pub timing: TimingRecord,
    /// Every hyperparameter the model was fitted with.
    pub params: Assignment,
    pub param_source: ParamSource,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub rows_dropped_outlier: usize,
    pub columns_dropped_correlation: usize,
    pub rows_dropped_balancing: usize,
    pub model_file: Option<String>,
}

impl ReportRow {
    pub fn key(&self) -> (String, Algorithm, Scenario) {
        (self.slice.clone(), self.algorithm, self.scenario)
    }

    pub fn total_seconds(&self) -> f64 {
        self.timing.fit_seconds + self.timing.predict_total_seconds
    }
}

/// What happened to one slice before model fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub slice: String,
    pub ingest: IngestReport,
    pub rows_loaded: usize,
    /// Rows left after the stratified row budget.
    pub rows_budgeted: usize,
    pub n_features_raw: usize,
    pub balance_enabled: bool,
    pub preprocess: Option<PreprocessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSearch {
    pub slice: String,
    pub result: SearchResult,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub dataset: String,
    pub rows: Vec<ReportRow>,
    pub slices: Vec<SliceSummary>,
    /// Grid details; written to per-slice CSVs rather than the JSON report.
    #[serde(skip)]
    pub searches: Vec<SliceSearch>,
}

/// Flat CSV form of a [`ReportRow`]. Timing lives in a separate file so this one is
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCsvRow {
    pub slice: String,
    pub algorithm: String,
    pub scenario: String,
    pub accuracy: String,
    pub precision: String,
    pub recall: String,
    pub f1: String,
    pub roc_auc: String,
    pub accuracy_full: f64,
    pub precision_full: f64,
    pub recall_full: f64,
    pub f1_full: f64,
    pub roc_auc_full: f64,
    pub params: String,
    pub param_source: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub rows_dropped_outlier: usize,
    pub columns_dropped_correlation: usize,
    pub rows_dropped_balancing: usize,
    pub undefined_metrics: String,
    pub model_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingCsvRow {
    pub slice: String,
    pub algorithm: String,
    pub scenario: String,
    pub fit_seconds: f64,
    pub predict_total_seconds: f64,
    pub predict_per_instance_seconds: f64,
    pub search_seconds: Option<f64>,
    pub preprocess_seconds: String,
}

/// Four-decimal display form used in tables.
pub fn display4(x: f64) -> String {
    format!("{x:.4}")
}

impl From<&ReportRow> for ReportCsvRow {
    fn from(r: &ReportRow) -> Self {
        let m = &r.metrics;
        Self {
            slice: r.slice.clone(),
            algorithm: r.algorithm.id().into(),
            scenario: r.scenario.id().into(),
            accuracy: display4(m.accuracy),
            precision: display4(m.precision_weighted),
            recall: display4(m.recall_weighted),
            f1: display4(m.f1_weighted),
            roc_auc: display4(m.roc_auc),
            accuracy_full: m.accuracy,
            precision_full: m.precision_weighted,
            recall_full: m.recall_weighted,
            f1_full: m.f1_weighted,
            roc_auc_full: m.roc_auc,
            params: format_assignment(&r.params),
            param_source: r.param_source.id().into(),
            n_train: r.n_train,
            n_test: r.n_test,
            n_features: r.n_features,
            rows_dropped_outlier: r.rows_dropped_outlier,
            columns_dropped_correlation: r.columns_dropped_correlation,
            rows_dropped_balancing: r.rows_dropped_balancing,
            undefined_metrics: m.undefined.join(";"),
            model_file: r.model_file.clone().unwrap_or_default(),
        }
    }
}

impl From<&ReportRow> for TimingCsvRow {
    fn from(r: &ReportRow) -> Self {
        let t = &r.timing;
        Self {
            slice: r.slice.clone(),
            algorithm: r.algorithm.id().into(),
            scenario: r.scenario.id().into(),
            fit_seconds: t.fit_seconds,
            predict_total_seconds: t.predict_total_seconds,
            predict_per_instance_seconds: t.predict_per_instance_seconds,
            search_seconds: t.search_seconds,
            preprocess_seconds: t
                .preprocess_stage_seconds
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

fn csv_string<R: Serialize>(rows: impl Iterator<Item = R>, header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub const REPORT_CSV_COLUMNS: [&str; 23] = [
    "slice",
    "algorithm",
    "scenario",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "roc_auc",
    "accuracy_full",
    "precision_full",
    "recall_full",
    "f1_full",
    "roc_auc_full",
    "params",
    "param_source",
    "n_train",
    "n_test",
    "n_features",
    "rows_dropped_outlier",
    "columns_dropped_correlation",
    "rows_dropped_balancing",
    "undefined_metrics",
    "model_file",
];

pub const TIMING_CSV_COLUMNS: [&str; 8] = [
    "slice",
    "algorithm",
    "scenario",
    "fit_seconds",
    "predict_total_seconds",
    "predict_per_instance_seconds",
    "search_seconds",
    "preprocess_seconds",
];

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl ScenarioReport {
    pub fn row(&self, slice: &str, algorithm: Algorithm, scenario: Scenario) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.slice == slice && r.algorithm == algorithm && r.scenario == scenario)
    }

    pub fn slice_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.slice.as_str()) {
                out.push(&r.slice);
            }
        }
        out
    }

    /// Deterministic CSV: metrics at two precisions, parameters and drop statistics.
    pub fn to_csv(&self) -> String {
        csv_string(self.rows.iter().map(ReportCsvRow::from), &REPORT_CSV_COLUMNS)
    }

    pub fn timing_csv(&self) -> String {
        csv_string(self.rows.iter().map(TimingCsvRow::from), &TIMING_CSV_COLUMNS)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Contract(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("unreadable report: {e}")))
    }

    /// Markdown tables: metrics per slice, preprocessing stage times, per-row timings.
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Benchmark report: {}\n", self.dataset);
        for slice in self.slice_names() {
            let _ = writeln!(md, "## {slice}\n");
            let _ = writeln!(
                md,
                "| Algorithm | Scenario | Accuracy | Precision | Recall | F1 | ROC-AUC | Fit (s) | Predict (s) | Per instance (s) | Parameters |"
            );
            let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|---|---|");
            for r in self.rows.iter().filter(|r| r.slice == slice) {
                let m = &r.metrics;
                let params = match r.param_source {
                    ParamSource::Grid => format_assignment(&r.params),
                    ParamSource::Default => "default".into(),
                };
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} | {:.4} | {:.4} | {:.3e} | {} |",
                    r.algorithm.display_name(),
                    r.scenario,
                    display4(m.accuracy),
                    display4(m.precision_weighted),
                    display4(m.recall_weighted),
                    display4(m.f1_weighted),
                    display4(m.roc_auc),
                    r.timing.fit_seconds,
                    r.timing.predict_total_seconds,
                    r.timing.predict_per_instance_seconds,
                    params,
                );
            }
            md.push('\n');
        }
        let stages: Vec<&SliceSummary> = self.slices.iter().filter(|s| s.preprocess.is_some()).collect();
        if let Some(first) = stages.first().and_then(|s| s.preprocess.as_ref()) {
            let names: Vec<&str> = first.stage_seconds.iter().map(|(k, _)| k.as_str()).collect();
            let _ = writeln!(md, "## Preprocessing time (s)\n");
            let _ = writeln!(md, "| Slice | {} | Rows dropped (outlier) | Columns dropped | Rows dropped (balancing) |", names.join(" | "));
            let _ = writeln!(md, "|---|{}---|---|---|", "---|".repeat(names.len()));
            for s in stages {
                let p = s.preprocess.as_ref().expect("filtered");
                let cells: Vec<String> = names
                    .iter()
                    .map(|n| p.seconds(n).map_or_else(|| "-".into(), |v| format!("{v:.4}")))
                    .collect();
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    s.slice,
                    cells.join(" | "),
                    p.rows_dropped_outlier,
                    p.columns_dropped_correlation.len(),
                    p.rows_dropped_balancing
                );
            }
            md.push('\n');
        }
        md
    }

    /// Writes the CSV, timing, JSON and (optionally) Markdown forms plus per-slice
    /// grid and preprocessing CSVs into `dir`.
    pub fn write_all(&self, dir: &Path, markdown: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(REPORT_CSV), &self.to_csv())?;
        write_file(&dir.join(TIMING_CSV), &self.timing_csv())?;
        write_file(&dir.join(REPORT_JSON), &self.to_json()?)?;
        if markdown {
            write_file(&dir.join(REPORT_MD), &self.to_markdown())?;
        }
        for s in &self.searches {
            let name = format!("grid_{}_{}.csv", file_stem(&s.slice), s.result.algorithm.id());
            write_file(&dir.join(name), &s.result.to_csv())?;
        }
        for s in &self.slices {
            if let Some(p) = &s.preprocess {
                p.write_csv(&dir.join(format!("preprocess_{}.csv", file_stem(&s.slice))))?;
            }
        }
        Ok(())
    }
}

/// Lowercase, filesystem-safe form of a slice name.
pub fn file_stem(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

/// Parses a report CSV written by [`ScenarioReport::to_csv`].
pub fn read_report_csv(text: &str) -> Result<Vec<ReportCsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(|e| Error::Config(format!("report csv: {e}")))).collect()
}
