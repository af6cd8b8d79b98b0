use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of each training row (by position) to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub stratified: bool,
    pub seed: u64,
}

impl FoldPlan {
    /// Positions used for fitting and for validation when `fold` is held out.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut fit = Vec::with_capacity(self.fold_of.len());
        let mut val = Vec::with_capacity(self.fold_of.len() / self.k + 1);
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                val.push(i);
            } else {
                fit.push(i);
            }
        }
        (fit, val)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified folds: each class is shuffled, the benign rows then the attack rows are
/// dealt round-robin, so class shares and fold sizes differ by at most one row.
pub fn make_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Fold(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut dealt = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < k {
            return Err(Error::Fold(format!("class {class} has {} row(s), fewer than k = {k}", rows.len())));
        }
        rows.shuffle(&mut rng);
        for r in rows {
            fold_of[r] = dealt % k;
            dealt += 1;
        }
    }
    Ok(FoldPlan { k, fold_of, stratified: true, seed })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn ten_rows_five_folds_of_two() {
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let plan = make_folds(&y, 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn two_folds_hold_one_of_each_class() {
        let y = [0, 0, 1, 1];
        let plan = make_folds(&y, 2, 3).unwrap();
        for f in 0..2 {
            let (_, val) = plan.split(f);
            let mut classes: Vec<u8> = val.iter().map(|&i| y[i]).collect();
            classes.sort_unstable();
            assert_eq!(classes, vec![0, 1]);
        }
    }

    #[test]
    fn folds_cover_the_training_set_exactly_once() {
        let y: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
        let plan = make_folds(&y, 5, 11).unwrap();
        let mut seen = vec![0; y.len()];
        for f in 0..5 {
            let (fit, val) = plan.split(f);
            assert_eq!(fit.len() + val.len(), y.len());
            for i in val {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn too_few_rows_per_class() {
        assert!(matches!(make_folds(&[0, 0, 0, 1], 2, 0), Err(Error::Fold(_))));
        assert!(matches!(make_folds(&[0, 1], 1, 0), Err(Error::Fold(_))));
    }

    proptest! {
        #[test]
        fn sizes_balanced(benign in 5usize..100, attack in 5usize..100, k in 2usize..6, seed in any::<u64>()) {
            let mut y = vec![0u8; benign];
            y.extend(vec![1u8; attack]);
            let plan = make_folds(&y, k, seed).unwrap();
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for class in [0u8, 1] {
                let mut per = vec![0usize; k];
                for (i, &f) in plan.fold_of.iter().enumerate() {
                    if y[i] == class { per[f] += 1; }
                }
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
        }
    }
}
