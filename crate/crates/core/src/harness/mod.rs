//! Scenario orchestration: load slices, run CE1/CE2/CE3, time every phase and emit reports.

pub mod compare;
pub mod config;
pub mod data;
pub mod report;
pub mod scenario;

pub use compare::{compare_scenarios, percent_change, AlgorithmComparison, Comparison, MetricDelta, ScenarioTimes};
pub use config::{HarnessConfig, Overrides, Scenario, Seeds, DATA_DIR_ENV};
pub use report::{ParamSource, ReportRow, ScenarioReport, SliceSummary, TimingRecord};
pub use scenario::{load_slices, run, run_slices, RunOutput, SavedModel, SliceData};
