//! Binary classification metrics with attack as the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Contract(format!(
            "confusion: {} truth labels, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Contract("confusion: no instances".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            (1, 0) => c.fn_ += 1,
            _ => return Err(Error::Contract(format!("non-binary label pair ({t}, {p})"))),
        }
    }
    Ok(c)
}

/// Per-class precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Threshold-dependent metrics. `undefined` names every ratio that was 0/0 and set to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub per_class: [ClassScores; 2],
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64, name: String, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name);
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus support-weighted precision, recall and F1 over both classes.
pub fn scalar_metrics(c: &ConfusionCounts) -> ScalarMetrics {
    let n = c.total();
    let mut undefined = Vec::new();
    // class 0 treats benign as positive: its tp is tn, its fp is fn, its fn is fp
    let per = |tp: u64, fp: u64, fn_: u64, class: usize, undefined: &mut Vec<String>| {
        let precision = ratio(tp, tp + fp, format!("precision[{class}]"), undefined);
        let recall = ratio(tp, tp + fn_, format!("recall[{class}]"), undefined);
        let f1 = if precision + recall == 0.0 {
            undefined.push(format!("f1[{class}]"));
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores { precision, recall, f1, support: tp + fn_ }
    };
    let benign = per(c.tn, c.fn_, c.fp, 0, &mut undefined);
    let attack = per(c.tp, c.fp, c.fn_, 1, &mut undefined);
    let weighted = |f: fn(&ClassScores) -> f64| {
        if n == 0 {
            0.0
        } else {
            (f(&benign) * benign.support as f64 + f(&attack) * attack.support as f64) / n as f64
        }
    };
    ScalarMetrics {
        accuracy: if n == 0 { 0.0 } else { (c.tp + c.tn) as f64 / n as f64 },
        precision_weighted: weighted(|s| s.precision),
        recall_weighted: weighted(|s| s.recall),
        f1_weighted: weighted(|s| s.f1),
        per_class: [benign, attack],
        undefined,
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic, with average ranks for ties.
pub fn roc_auc<T: Scalar>(y_true: &[u8], scores: &[T]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::Contract(format!("roc_auc: {} labels, {} scores", y_true.len(), scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Contract("roc_auc: non-finite score".into()));
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their average
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| y_true[k] == 1).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// The five reported metrics plus the confusion counts they derive from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub roc_auc: f64,
    pub confusion: ConfusionCounts,
    pub undefined: Vec<String>,
}

pub fn evaluate<T: Scalar>(y_true: &[u8], y_pred: &[u8], scores: &[T]) -> Result<MetricSet> {
    let counts = confusion(y_true, y_pred)?;
    let s = scalar_metrics(&counts);
    Ok(MetricSet {
        accuracy: s.accuracy,
        precision_weighted: s.precision_weighted,
        recall_weighted: s.recall_weighted,
        f1_weighted: s.f1_weighted,
        roc_auc: roc_auc(y_true, scores)?,
        confusion: counts,
        undefined: s.undefined,
    })
}
