//! Outlier filtering, min-max normalization, correlation-based feature elimination and
//! class balancing, run in that fixed order.

mod balance;
mod correlation;
mod scaler;
mod zscore;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use balance::balance;
pub use correlation::{correlation_filter, pearson_corr, CorrelationDrop};
pub use scaler::{apply_scaler, fit_scaler, ColumnRange, ScalerParams};
pub use zscore::{mean_std, zscore_filter};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

pub const STAGE_OUTLIER: &str = "Outlier Filtering";
pub const STAGE_NORMALIZATION: &str = "Normalization";
pub const STAGE_CORRELATION: &str = "Correlation Filtering";
pub const STAGE_BALANCING: &str = "Balancing";
pub const STAGE_TOTAL: &str = "Total";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FitScope {
    /// Statistics from the whole table before partitioning.
    #[default]
    WholeDataset,
    /// Statistics from the training partition only; the test partition is transformed.
    TrainOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub zscore_threshold: f64,
    pub corr_threshold: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub balance: bool,
    pub balance_seed: u64,
    pub fit_scope: FitScope,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            zscore_threshold: 7.0,
            corr_threshold: 0.99,
            scale_min: 0.0,
            scale_max: 1.0,
            balance: true,
            balance_seed: 42,
            fit_scope: FitScope::WholeDataset,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zscore_threshold > 0.0) {
            return Err(Error::Config("zscore_threshold must be > 0".into()));
        }
        if !(self.corr_threshold > 0.0 && self.corr_threshold <= 1.0) {
            return Err(Error::Config("corr_threshold must lie in (0, 1]".into()));
        }
        if !(self.scale_min < self.scale_max) {
            return Err(Error::Config("scale_min must be below scale_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub rows_dropped_outlier: usize,
    pub columns_dropped_correlation: Vec<CorrelationDrop>,
    pub rows_dropped_balancing: usize,
    /// Wall-clock seconds per stage, in pipeline order, ending with the total.
    pub stage_seconds: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl PreprocessReport {
    fn absorb(&mut self, other: PreprocessReport) {
        self.rows_dropped_outlier += other.rows_dropped_outlier;
        self.columns_dropped_correlation.extend(other.columns_dropped_correlation);
        self.rows_dropped_balancing += other.rows_dropped_balancing;
        self.warnings.extend(other.warnings);
    }

    pub fn seconds(&self, stage: &str) -> Option<f64> {
        self.stage_seconds.iter().find(|(s, _)| s == stage).map(|&(_, t)| t)
    }

    /// CSV with one line per stage: `stage,rows_dropped,columns_dropped,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,rows_dropped,columns_dropped,seconds\n");
        let cols = self.columns_dropped_correlation.len();
        let counts = |stage: &str| match stage {
            STAGE_OUTLIER => (self.rows_dropped_outlier, 0),
            STAGE_CORRELATION => (0, cols),
            STAGE_BALANCING => (self.rows_dropped_balancing, 0),
            STAGE_TOTAL => (self.rows_dropped_outlier + self.rows_dropped_balancing, cols),
            _ => (0, 0),
        };
        for (stage, secs) in &self.stage_seconds {
            let (rows, cols) = counts(stage);
            let _ = writeln!(out, "{stage},{rows},{cols},{secs:.6}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Output of the preprocessing pipeline plus what is needed to transform held-out rows.
#[derive(Debug, Clone)]
pub struct Preprocessed<T> {
    pub table: ColumnarTable<T>,
    pub scaler: ScalerParams<T>,
    pub report: PreprocessReport,
    scale_min: T,
    scale_max: T,
}

impl<T: Scalar> Preprocessed<T> {
    /// Applies the fitted column selection and scaling to another table (no row drops).
    pub fn transform(&self, table: &ColumnarTable<T>) -> Result<ColumnarTable<T>> {
        let selected = table.select_named(self.table.names())?;
        apply_scaler(&selected, &self.scaler, self.scale_min, self.scale_max)
    }
}

/// Runs outlier filter → scaler → correlation filter → (optional) balancing, timing each stage.
pub fn run<T: Scalar>(table: &ColumnarTable<T>, config: &PreprocessConfig) -> Result<Preprocessed<T>> {
    config.validate()?;
    let mut report = PreprocessReport::default();
    let total = Instant::now();

    let t0 = Instant::now();
    let (filtered, frag) = zscore_filter(table, T::of(config.zscore_threshold))?;
    report.absorb(frag);
    report.stage_seconds.push((STAGE_OUTLIER.into(), t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let (scale_min, scale_max) = (T::of(config.scale_min), T::of(config.scale_max));
    let scaler = fit_scaler(&filtered);
    let scaled = apply_scaler(&filtered, &scaler, scale_min, scale_max)?;
    report.stage_seconds.push((STAGE_NORMALIZATION.into(), t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let (reduced, frag) = correlation_filter(&scaled, T::of(config.corr_threshold))?;
    report.absorb(frag);
    report.stage_seconds.push((STAGE_CORRELATION.into(), t0.elapsed().as_secs_f64()));

    let out = if config.balance {
        let t0 = Instant::now();
        let (balanced, frag) = balance(&reduced, config.balance_seed);
        report.absorb(frag);
        report.stage_seconds.push((STAGE_BALANCING.into(), t0.elapsed().as_secs_f64()));
        balanced
    } else {
        reduced
    };
    report.stage_seconds.push((STAGE_TOTAL.into(), total.elapsed().as_secs_f64()));

    Ok(Preprocessed { table: out, scaler, report, scale_min, scale_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ColumnarTable<f64> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let x = (i % 17) as f64;
            rows.push(vec![x, 2.0 * x + 3.0, ((i * 7) % 11) as f64, 100.0 + (i % 5) as f64]);
            labels.push(u8::from(i % 4 == 0));
        }
        rows[13][2] = 1e6;
        ColumnarTable::from_rows(&["a", "a2", "b", "c"], &rows, labels).unwrap()
    }

    #[test]
    fn pipeline_order_and_report() {
        let t = toy();
        let p = run(&t, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.report.rows_dropped_outlier, 1);
        assert_eq!(p.table.names(), &["a".to_string(), "b".to_string(), "c".to_string()]);
        assert_eq!(p.table.class_counts()[0], p.table.class_counts()[1]);
        let stages: Vec<_> = p.report.stage_seconds.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(stages, [STAGE_OUTLIER, STAGE_NORMALIZATION, STAGE_CORRELATION, STAGE_BALANCING, STAGE_TOTAL]);
        for col in p.table.columns() {
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let csv = p.report.to_csv();
        assert!(csv.starts_with("stage,rows_dropped,columns_dropped,seconds\nOutlier Filtering,1,0,"));
        assert!(csv.contains("\nCorrelation Filtering,0,1,"));
    }

    #[test]
    fn transform_reuses_fitted_columns_and_ranges() {
        let t = toy();
        let cfg = PreprocessConfig { balance: false, ..PreprocessConfig::default() };
        let p = run(&t, &cfg).unwrap();
        let held_out = t.select_rows(&[0, 1, 2]);
        let moved = p.transform(&held_out).unwrap();
        assert_eq!(moved.names(), p.table.names());
        assert_eq!(moved.row(0), p.table.row(0));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = PreprocessConfig { corr_threshold: 1.5, ..PreprocessConfig::default() };
        assert!(matches!(run(&toy(), &bad), Err(Error::Config(_))));
        let bad = PreprocessConfig { scale_min: 1.0, scale_max: 0.0, ..PreprocessConfig::default() };
        assert!(bad.validate().is_err());
    }
}
