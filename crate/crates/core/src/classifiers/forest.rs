use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::growth::Presorted;
use super::tree::{DecisionTree, TreeConfig};
use super::{check_width, Classifier};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    /// Fit trees on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
            parallel: false,
        }
    }
}

/// Bagged ensemble of Gini trees; the score is the fraction of trees voting attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RandomForest<T> {
    pub(crate) trees: Vec<DecisionTree<T>>,
    pub(crate) tree_seeds: Vec<u64>,
    pub(crate) features_per_split: usize,
    pub(crate) n_features: usize,
}

impl<T: Scalar> RandomForest<T> {
    pub fn fit(train: &ColumnarTable<T>, config: &ForestConfig) -> Self {
        let d = train.n_features();
        let n = train.n_rows();
        let m = config.max_features.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1));
        let presorted = Presorted::new(train);
        let tree_cfg = TreeConfig { max_depth: config.max_depth, min_samples_split: config.min_samples_split };
        let seeds: Vec<u64> = (0..config.n_trees as u64).map(|i| config.seed.wrapping_add(i)).collect();
        let grow_one = |&seed: &u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut weights = vec![0u32; n];
            if config.bootstrap {
                for _ in 0..n {
                    weights[rng.gen_range(0..n)] += 1;
                }
            } else {
                weights.fill(1);
            }
            DecisionTree::fit_weighted(train, &presorted, &weights, &tree_cfg, Some(m), Some(&mut rng))
        };
        let trees = if config.parallel {
            seeds.par_iter().map(grow_one).collect()
        } else {
            seeds.iter().map(grow_one).collect()
        };
        Self { trees, tree_seeds: seeds, features_per_split: m, n_features: d }
    }

    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }
}

impl<T: Scalar> Classifier<T> for RandomForest<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        check_width(self.n_features, x)?;
        let mut votes = vec![0u32; x.n_rows()];
        let half = T::of(0.5);
        for tree in &self.trees {
            for (r, v) in votes.iter_mut().enumerate() {
                if tree.score_row(x, r) > half {
                    *v += 1;
                }
            }
        }
        let k = T::of_usize(self.trees.len().max(1));
        Ok(votes.into_iter().map(|v| T::of(f64::from(v)) / k).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(n: usize) -> ColumnarTable<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[3] + 0.1 * r[5] > 0.8)).collect();
        ColumnarTable::from_rows(&["a", "b", "c", "d", "e", "f"], &rows, labels).unwrap()
    }

    #[test]
    fn single_unbagged_full_feature_tree_equals_plain_tree() {
        let t = noisy(120);
        let cfg = ForestConfig { n_trees: 1, bootstrap: false, max_features: Some(6), ..ForestConfig::default() };
        let forest = RandomForest::fit(&t, &cfg);
        let tree = DecisionTree::fit(&t, &TreeConfig::default());
        assert_eq!(forest.trees()[0], tree);
        assert_eq!(forest.predict_scores(&t).unwrap(), tree.predict_scores(&t).unwrap());
    }

    #[test]
    fn vote_fraction_scoring() {
        let t = ColumnarTable::from_rows(&["x"], &[vec![0.0], vec![1.0]], vec![0, 1]).unwrap();
        let leaf = |c: [u32; 2]| DecisionTree { nodes: vec![super::super::growth::Node::Leaf(c)], n_features: 1 };
        let forest = RandomForest {
            trees: vec![leaf([0, 3]), leaf([1, 4]), leaf([5, 1])],
            tree_seeds: vec![0, 1, 2],
            features_per_split: 1,
            n_features: 1,
        };
        let scores: Vec<f64> = forest.predict_scores(&t).unwrap();
        assert!((scores[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(forest.predict(&t).unwrap(), vec![1, 1]);
    }

    #[test]
    fn fixed_seed_is_deterministic_and_schedule_independent() {
        let t = noisy(200);
        let cfg = ForestConfig { n_trees: 8, seed: 17, ..ForestConfig::default() };
        let a = RandomForest::fit(&t, &cfg);
        let b = RandomForest::fit(&t, &cfg);
        let c = RandomForest::fit(&t, &ForestConfig { parallel: true, ..cfg });
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.features_per_split, 3);
        let other = RandomForest::fit(&t, &ForestConfig { seed: 18, ..cfg });
        assert_ne!(a, other);
    }

    #[test]
    fn bootstrap_leaf_counts_sum_to_sample_size() {
        let t = noisy(90);
        let cfg = ForestConfig { n_trees: 3, max_depth: Some(4), ..ForestConfig::default() };
        let forest = RandomForest::fit(&t, &cfg);
        for tree in forest.trees() {
            let total: u32 = tree
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    super::super::growth::Node::Leaf(c) => Some(c[0] + c[1]),
                    _ => None,
                })
                .sum();
            assert_eq!(total, 90);
        }
    }
}
