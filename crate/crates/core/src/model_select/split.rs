use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

fn class_rows(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        out[usize::from(l == 1)].push(i);
    }
    out
}

/// Stratified holdout: each class contributes `round(count · test_fraction)` rows to the
/// test set (kept within `[1, count - 1]`), chosen by a seeded shuffle.
pub fn stratified_split(labels: &[u8], test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (class, mut rows) in class_rows(labels).into_iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {class} has {} row(s); at least 2 are needed for a stratified split",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64 * test_fraction).round() as usize).clamp(1, rows.len() - 1);
        test_rows.extend_from_slice(&rows[..n_test]);
        train_rows.extend_from_slice(&rows[n_test..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitIndices { train_rows, test_rows, seed, test_fraction })
}

/// Seeded stratified subsample of at most `budget` rows, sorted ascending.
/// Each class keeps `round(count · budget / n)` rows, at least one if present.
pub fn stratified_subsample(labels: &[u8], budget: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if n <= budget {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(budget);
    for mut rows in class_rows(labels) {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let k = ((rows.len() as f64 * budget as f64 / n as f64).round() as usize).clamp(1, rows.len());
        keep.extend_from_slice(&rows[..k]);
    }
    keep.sort_unstable();
    keep
}
