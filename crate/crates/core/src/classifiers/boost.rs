//! Second-order gradient boosting on logistic loss with exact greedy regression trees.

use serde::{Deserialize, Serialize};

use super::growth::{self, Criterion, GrowLimits, Node, Presorted};
use super::{check_width, Classifier};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { rounds: 100, learning_rate: 0.3, max_depth: 6, lambda: 1.0, min_child_weight: 1.0 }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of probabilities `p` against `y`.
pub fn log_loss(y: &[u8], p: &[f64]) -> f64 {
    let eps = 1e-15;
    let s: f64 = y
        .iter()
        .zip(p)
        .map(|(&y, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    s / y.len() as f64
}

struct Newton<'a> {
    grad: &'a [f64],
    hess: &'a [f64],
    lambda: f64,
    min_child_weight: f64,
}

impl Newton<'_> {
    fn structure_score(&self, s: &[f64; 2]) -> f64 {
        s[0] * s[0] / (s[1] + self.lambda)
    }
}

impl<T: Scalar> Criterion<T> for Newton<'_> {
    /// (Σg, Σh)
    type Stats = [f64; 2];
    type Leaf = f64;

    #[inline]
    fn add(&self, s: &mut [f64; 2], row: usize, _weight: u32) {
        s[0] += self.grad[row];
        s[1] += self.hess[row];
    }

    #[inline]
    fn diff(&self, total: &[f64; 2], left: &[f64; 2]) -> [f64; 2] {
        [total[0] - left[0], total[1] - left[1]]
    }

    fn wants_split(&self, node: &[f64; 2]) -> bool {
        node[1] >= 2.0 * self.min_child_weight
    }

    #[inline]
    fn split_cost(&self, l: &[f64; 2], r: &[f64; 2]) -> Option<f64> {
        if l[1] < self.min_child_weight || r[1] < self.min_child_weight {
            return None;
        }
        Some(-(self.structure_score(l) + self.structure_score(r)))
    }

    /// Split only when the loss reduction `½(S_L + S_R − S)` is positive.
    fn accept(&self, node: &[f64; 2], cost: f64) -> bool {
        0.5 * (-cost - self.structure_score(node)) > 1e-12
    }

    fn leaf(&self, s: &[f64; 2]) -> f64 {
        -s[0] / (s[1] + self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTree<T> {
    pub(crate) nodes: Vec<Node<T, f64>>,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn output(&self, table: &ColumnarTable<T>, row: usize) -> f64 {
        *growth::route(&self.nodes, table, row)
    }

    pub fn nodes(&self) -> &[Node<T, f64>] {
        &self.nodes
    }
}

/// Boosted ensemble: `p = σ(initial + shrinkage · Σ tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GradientBoosting<T> {
    pub(crate) initial: f64,
    pub(crate) shrinkage: f64,
    pub(crate) trees: Vec<RegressionTree<T>>,
    pub(crate) n_features: usize,
    /// Training log-loss after each round, starting with the empty ensemble.
    pub(crate) train_loss: Vec<f64>,
}

impl<T: Scalar> GradientBoosting<T> {
    pub fn fit(train: &ColumnarTable<T>, config: &BoostConfig) -> Self {
        let n = train.n_rows();
        let y = train.labels();
        let pos = y.iter().filter(|&&l| l == 1).count() as f64;
        let prior = (pos / n.max(1) as f64).clamp(1e-12, 1.0 - 1e-12);
        let initial = (prior / (1.0 - prior)).ln();
        let presorted = Presorted::new(train);
        let weights = vec![1u32; n];
        let limits = GrowLimits { max_depth: Some(config.max_depth), min_samples_split: 2, max_features: None };

        let mut margin = vec![initial; n];
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut prob: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
        let mut train_loss = vec![log_loss(y, &prob)];
        let mut trees = Vec::with_capacity(config.rounds);
        for _ in 0..config.rounds {
            for i in 0..n {
                grad[i] = prob[i] - f64::from(y[i]);
                hess[i] = (prob[i] * (1.0 - prob[i])).max(1e-16);
            }
            let criterion = Newton {
                grad: &grad,
                hess: &hess,
                lambda: config.lambda,
                min_child_weight: config.min_child_weight,
            };
            let tree = RegressionTree { nodes: growth::grow(train, &presorted, &weights, &criterion, limits, None) };
            for i in 0..n {
                margin[i] += config.learning_rate * tree.output(train, i);
                prob[i] = sigmoid(margin[i]);
            }
            train_loss.push(log_loss(y, &prob));
            trees.push(tree);
        }
        Self { initial, shrinkage: config.learning_rate, trees, n_features: train.n_features(), train_loss }
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    pub fn trees(&self) -> &[RegressionTree<T>] {
        &self.trees
    }

    pub fn initial_score(&self) -> f64 {
        self.initial
    }
}

impl<T: Scalar> Classifier<T> for GradientBoosting<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        check_width(self.n_features, x)?;
        Ok((0..x.n_rows())
            .map(|r| {
                let sum: f64 = self.trees.iter().map(|t| t.output(x, r)).sum();
                T::of(sigmoid(self.initial + self.shrinkage * sum))
            })
            .collect())
    }
}
