use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::growth::{self, Criterion, GrowLimits, Node, Presorted};
use super::{check_width, Classifier};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::table::{ColumnarTable, ATTACK};

/// Gini impurity `1 - Σ p_c²` of a two-class count vector.
pub fn gini(counts: [f64; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (counts[0] / n, counts[1] / n);
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until purity.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2 }
    }
}

pub(crate) struct Gini<'a> {
    pub labels: &'a [u8],
}

impl<T: Scalar> Criterion<T> for Gini<'_> {
    type Stats = [f64; 2];
    type Leaf = [u32; 2];

    #[inline]
    fn add(&self, stats: &mut [f64; 2], row: usize, weight: u32) {
        stats[usize::from(self.labels[row])] += f64::from(weight);
    }

    #[inline]
    fn diff(&self, total: &[f64; 2], left: &[f64; 2]) -> [f64; 2] {
        [total[0] - left[0], total[1] - left[1]]
    }

    fn wants_split(&self, node: &[f64; 2]) -> bool {
        node[0] > 0.0 && node[1] > 0.0
    }

    /// Weighted child impurity `n_l·G_l + n_r·G_r`.
    #[inline]
    fn split_cost(&self, l: &[f64; 2], r: &[f64; 2]) -> Option<f64> {
        let nl = l[0] + l[1];
        let nr = r[0] + r[1];
        if nl == 0.0 || nr == 0.0 {
            return None;
        }
        Some(nl - (l[0] * l[0] + l[1] * l[1]) / nl + nr - (r[0] * r[0] + r[1] * r[1]) / nr)
    }

    fn accept(&self, _node: &[f64; 2], _cost: f64) -> bool {
        true
    }

    fn leaf(&self, node: &[f64; 2]) -> [u32; 2] {
        [node[0] as u32, node[1] as u32]
    }
}

/// Binary classification tree grown greedily on Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionTree<T> {
    pub(crate) nodes: Vec<Node<T, [u32; 2]>>,
    pub(crate) n_features: usize,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn fit(train: &ColumnarTable<T>, config: &TreeConfig) -> Self {
        let presorted = Presorted::new(train);
        let weights = vec![1u32; train.n_rows()];
        Self::fit_weighted(train, &presorted, &weights, config, None, None)
    }

    pub(crate) fn fit_weighted(
        train: &ColumnarTable<T>,
        presorted: &Presorted,
        weights: &[u32],
        config: &TreeConfig,
        max_features: Option<usize>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let limits = GrowLimits {
            max_depth: config.max_depth,
            min_samples_split: config.min_samples_split,
            max_features,
        };
        let criterion = Gini { labels: train.labels() };
        let nodes = growth::grow(train, presorted, weights, &criterion, limits, rng);
        Self { nodes, n_features: train.n_features() }
    }

    pub fn nodes(&self) -> &[Node<T, [u32; 2]>] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk<T, L>(nodes: &[Node<T, L>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn leaf_score(counts: &[u32; 2]) -> T {
        let n = counts[0] + counts[1];
        if n == 0 {
            return T::of(0.5);
        }
        T::of(f64::from(counts[ATTACK as usize]) / f64::from(n))
    }

    pub(crate) fn score_row(&self, table: &ColumnarTable<T>, row: usize) -> T {
        Self::leaf_score(growth::route(&self.nodes, table, row))
    }

    pub fn score_one(&self, x: &[T]) -> T {
        Self::leaf_score(growth::route_slice(&self.nodes, x))
    }
}

impl<T: Scalar> Classifier<T> for DecisionTree<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        check_width(self.n_features, x)?;
        Ok((0..x.n_rows()).map(|r| self.score_row(x, r)).collect())
    }
}
