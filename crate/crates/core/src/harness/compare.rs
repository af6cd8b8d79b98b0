use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::report::{ReportRow, ScenarioReport};
use crate::classifiers::Algorithm;
use crate::error::{Error, Result};

/// Signed change from `before` to `after` in percent; `None` when `before` is zero.
pub fn percent_change(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (after - before) / before)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

impl MetricDelta {
    fn between(from: &ReportRow, to: &ReportRow) -> Self {
        let (a, b) = (&from.metrics, &to.metrics);
        Self {
            accuracy: b.accuracy - a.accuracy,
            precision: b.precision_weighted - a.precision_weighted,
            recall: b.recall_weighted - a.recall_weighted,
            f1: b.f1_weighted - a.f1_weighted,
            roc_auc: b.roc_auc - a.roc_auc,
        }
    }

    fn mean(items: &[MetricDelta]) -> Self {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&MetricDelta) -> f64| items.iter().map(f).sum::<f64>() / n;
        Self {
            accuracy: sum(|d| d.accuracy),
            precision: sum(|d| d.precision),
            recall: sum(|d| d.recall),
            f1: sum(|d| d.f1),
            roc_auc: sum(|d| d.roc_auc),
        }
    }
}

/// Mean timings of one algorithm under one scenario, averaged over slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTimes {
    pub scenario: Scenario,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmComparison {
    pub algorithm: Algorithm,
    pub times: Vec<ScenarioTimes>,
    /// Signed change of fit + predict time from CE1 to CE2 (negative means faster).
    pub change_pct: Option<f64>,
    /// The same comparison as a reduction: `100 · (t_CE1 − t_CE2) / t_CE1`.
    pub reduction_pct: Option<f64>,
    pub fit_change_pct: Option<f64>,
    pub predict_change_pct: Option<f64>,
    pub delta_ce2_ce1: Option<MetricDelta>,
    pub delta_ce3_ce2: Option<MetricDelta>,
}

impl AlgorithmComparison {
    pub fn times_for(&self, scenario: Scenario) -> Option<&ScenarioTimes> {
        self.times.iter().find(|t| t.scenario == scenario)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub slices: Vec<String>,
    pub algorithms: Vec<AlgorithmComparison>,
}

/// Averages timings per algorithm and scenario across slices and reports the CE1→CE2
/// time change plus metric deltas. Every slice × algorithm × scenario seen anywhere in
/// `reports` must be present exactly once.
pub fn compare_scenarios(reports: &[ScenarioReport]) -> Result<Comparison> {
    let rows: Vec<&ReportRow> = reports.iter().flat_map(|r| &r.rows).collect();
    let mut slices: Vec<String> = Vec::new();
    let mut algorithms: Vec<Algorithm> = Vec::new();
    let mut scenarios: BTreeSet<Scenario> = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for r in &rows {
        if !slices.contains(&r.slice) {
            slices.push(r.slice.clone());
        }
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
        scenarios.insert(r.scenario);
        if !seen.insert(r.key()) {
            return Err(Error::Contract(format!(
                "duplicate report row for ({}, {}, {})",
                r.slice, r.algorithm, r.scenario
            )));
        }
    }
    let mut missing = Vec::new();
    for s in &slices {
        for &a in &algorithms {
            for &sc in &scenarios {
                if !seen.contains(&(s.clone(), a, sc)) {
                    missing.push(format!("({s}, {a}, {sc})"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Comparison { missing });
    }
    let find = |s: &str, a: Algorithm, sc: Scenario| {
        *rows.iter().find(|r| r.slice == s && r.algorithm == a && r.scenario == sc).expect("coverage checked")
    };

    let n = slices.len() as f64;
    let mut out = Vec::with_capacity(algorithms.len());
    for &a in &algorithms {
        let times: Vec<ScenarioTimes> = scenarios
            .iter()
            .map(|&sc| {
                let picked: Vec<&ReportRow> = slices.iter().map(|s| find(s, a, sc)).collect();
                let fit = picked.iter().map(|r| r.timing.fit_seconds).sum::<f64>() / n;
                let predict = picked.iter().map(|r| r.timing.predict_total_seconds).sum::<f64>() / n;
                ScenarioTimes { scenario: sc, fit_seconds: fit, predict_seconds: predict, total_seconds: fit + predict }
            })
            .collect();
        let get = |sc: Scenario| times.iter().find(|t| t.scenario == sc);
        let (t1, t2) = (get(Scenario::Ce1), get(Scenario::Ce2));
        let pair = t1.zip(t2);
        let change_pct = pair.and_then(|(a, b)| percent_change(a.total_seconds, b.total_seconds));
        let delta = |from: Scenario, to: Scenario| {
            (scenarios.contains(&from) && scenarios.contains(&to)).then(|| {
                let each: Vec<MetricDelta> =
                    slices.iter().map(|s| MetricDelta::between(find(s, a, from), find(s, a, to))).collect();
                MetricDelta::mean(&each)
            })
        };
        out.push(AlgorithmComparison {
            algorithm: a,
            change_pct,
            reduction_pct: change_pct.map(|c| -c),
            fit_change_pct: pair.and_then(|(a, b)| percent_change(a.fit_seconds, b.fit_seconds)),
            predict_change_pct: pair.and_then(|(a, b)| percent_change(a.predict_seconds, b.predict_seconds)),
            delta_ce2_ce1: delta(Scenario::Ce1, Scenario::Ce2),
            delta_ce3_ce2: delta(Scenario::Ce2, Scenario::Ce3),
            times,
        });
    }
    Ok(Comparison { slices, algorithms: out })
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(String::new, |v| format!("{v:.digits$}"))
}

impl Comparison {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmComparison> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "algorithm",
            "scenario",
            "mean_fit_seconds",
            "mean_predict_seconds",
            "mean_total_seconds",
            "change_pct_ce1_to_ce2",
            "reduction_pct_ce1_to_ce2",
            "d_accuracy_ce2_ce1",
            "d_f1_ce2_ce1",
            "d_roc_auc_ce2_ce1",
            "d_accuracy_ce3_ce2",
            "d_f1_ce3_ce2",
            "d_roc_auc_ce3_ce2",
        ])
        .expect("in-memory write");
        for a in &self.algorithms {
            for t in &a.times {
                let d1 = a.delta_ce2_ce1;
                let d2 = a.delta_ce3_ce2;
                w.write_record([
                    a.algorithm.id().to_string(),
                    t.scenario.id().to_string(),
                    t.fit_seconds.to_string(),
                    t.predict_seconds.to_string(),
                    t.total_seconds.to_string(),
                    opt(a.change_pct, 2),
                    opt(a.reduction_pct, 2),
                    opt(d1.map(|d| d.accuracy), 6),
                    opt(d1.map(|d| d.f1), 6),
                    opt(d1.map(|d| d.roc_auc), 6),
                    opt(d2.map(|d| d.accuracy), 6),
                    opt(d2.map(|d| d.f1), 6),
                    opt(d2.map(|d| d.roc_auc), 6),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "## Scenario comparison ({} slice(s))\n", self.slices.len());
        let _ = writeln!(
            md,
            "| Algorithm | CE1 fit+predict (s) | CE2 fit+predict (s) | CE3 fit+predict (s) | Change CE1→CE2 | Δ accuracy CE2−CE1 | Δ accuracy CE3−CE2 |"
        );
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for a in &self.algorithms {
            let t = |sc| a.times_for(sc).map_or_else(|| "-".to_string(), |t| format!("{:.4}", t.total_seconds));
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} |",
                a.algorithm.display_name(),
                t(Scenario::Ce1),
                t(Scenario::Ce2),
                t(Scenario::Ce3),
                a.change_pct.map_or_else(|| "-".into(), |c| format!("{c:+.2}%")),
                a.delta_ce2_ce1.map_or_else(|| "-".into(), |d| format!("{:+.4}", d.accuracy)),
                a.delta_ce3_ce2.map_or_else(|| "-".into(), |d| format!("{:+.4}", d.accuracy)),
            );
        }
        md.push_str("\nCE3 times include no search cost but come from grid-selected models; they are not part of the CE1/CE2 time comparison.\n");
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::{ParamSource, TimingRecord};
    use crate::metrics::{ConfusionCounts, MetricSet};

    fn row(slice: &str, algorithm: Algorithm, scenario: Scenario, fit: f64, predict: f64, acc: f64) -> ReportRow {
        ReportRow {
            slice: slice.into(),
            algorithm,
            scenario,
            metrics: MetricSet {
                accuracy: acc,
                precision_weighted: acc,
                recall_weighted: acc,
                f1_weighted: acc,
                roc_auc: acc,
                confusion: ConfusionCounts { tp: 1, fp: 0, tn: 1, fn_: 0 },
                undefined: Vec::new(),
            },
            timing: TimingRecord { fit_seconds: fit, predict_total_seconds: predict, ..Default::default() },
            params: algorithm.default_params(),
            param_source: ParamSource::Default,
            n_train: 1,
            n_test: 1,
            n_features: 1,
            rows_dropped_outlier: 0,
            columns_dropped_correlation: 0,
            rows_dropped_balancing: 0,
            model_file: None,
        }
    }

    #[test]
    fn halving_time_is_minus_fifty_percent() {
        assert_eq!(percent_change(2.0, 1.0), Some(-50.0));
        let rep = ScenarioReport {
            rows: vec![
                row("all", Algorithm::Dt, Scenario::Ce1, 1.5, 0.5, 0.9),
                row("all", Algorithm::Dt, Scenario::Ce2, 0.75, 0.25, 0.95),
            ],
            ..Default::default()
        };
        let c = compare_scenarios(&[rep]).unwrap();
        let dt = c.get(Algorithm::Dt).unwrap();
        assert_eq!(dt.change_pct, Some(-50.0));
        assert_eq!(dt.reduction_pct, Some(50.0));
        assert!((dt.delta_ce2_ce1.unwrap().accuracy - 0.05).abs() < 1e-12);
        assert!(dt.delta_ce3_ce2.is_none());
    }

    #[test]
    fn identical_scenarios_compare_to_zero() {
        let mut rows = Vec::new();
        for s in ["a", "b"] {
            for sc in Scenario::ALL {
                rows.push(row(s, Algorithm::Nb, sc, 1.0, 0.1, 0.8));
            }
        }
        let c = compare_scenarios(&[ScenarioReport { rows, ..Default::default() }]).unwrap();
        let nb = c.get(Algorithm::Nb).unwrap();
        assert_eq!(nb.change_pct, Some(0.0));
        assert_eq!(nb.delta_ce2_ce1.unwrap(), MetricDelta::default());
        assert_eq!(nb.delta_ce3_ce2.unwrap(), MetricDelta::default());
    }

    #[test]
    fn means_average_over_slices_and_reports_merge() {
        let r1 = ScenarioReport {
            rows: vec![row("a", Algorithm::Rf, Scenario::Ce1, 4.0, 0.0, 0.9), row("b", Algorithm::Rf, Scenario::Ce1, 2.0, 0.0, 0.9)],
            ..Default::default()
        };
        let r2 = ScenarioReport {
            rows: vec![row("a", Algorithm::Rf, Scenario::Ce2, 1.0, 0.0, 0.9), row("b", Algorithm::Rf, Scenario::Ce2, 2.0, 0.0, 0.9)],
            ..Default::default()
        };
        let c = compare_scenarios(&[r1, r2]).unwrap();
        let rf = c.get(Algorithm::Rf).unwrap();
        assert_eq!(rf.times_for(Scenario::Ce1).unwrap().total_seconds, 3.0);
        assert_eq!(rf.times_for(Scenario::Ce2).unwrap().total_seconds, 1.5);
        assert_eq!(rf.reduction_pct, Some(50.0));
        assert!(c.to_csv().lines().count() == 3);
        assert!(c.to_markdown().contains("-50.00%"));
    }

    #[test]
    fn missing_triples_are_listed() {
        let rep = ScenarioReport {
            rows: vec![
                row("a", Algorithm::Dt, Scenario::Ce1, 1.0, 0.0, 0.9),
                row("a", Algorithm::Dt, Scenario::Ce2, 1.0, 0.0, 0.9),
                row("b", Algorithm::Dt, Scenario::Ce1, 1.0, 0.0, 0.9),
            ],
            ..Default::default()
        };
        match compare_scenarios(&[rep]).unwrap_err() {
            Error::Comparison { missing } => assert_eq!(missing, vec!["(b, dt, CE2)".to_string()]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn zero_baseline_has_no_percentage() {
        assert_eq!(percent_change(0.0, 1.0), None);
    }
}
