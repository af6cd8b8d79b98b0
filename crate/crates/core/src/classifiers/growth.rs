//! Depth-first tree growth over presorted feature orders, shared by the Gini trees and
//! the boosting regression trees.
//!
//! Each feature keeps the node's rows sorted by that feature's value, so a split search
//! is one linear scan per feature. After a split every feature's segment is stably
//! partitioned into the two children.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize, L: Serialize", deserialize = "T: Scalar, L: Deserialize<'de>"))]
pub enum Node<T, L> {
    Split { feature: usize, threshold: T, left: usize, right: usize },
    Leaf(L),
}

/// Routes `row` of `table` to its leaf. `x <= threshold` goes left.
pub fn route<'a, T: Scalar, L>(nodes: &'a [Node<T, L>], table: &ColumnarTable<T>, row: usize) -> &'a L {
    let mut at = 0;
    loop {
        match &nodes[at] {
            Node::Split { feature, threshold, left, right } => {
                at = if table.value(row, *feature) <= *threshold { *left } else { *right };
            }
            Node::Leaf(leaf) => return leaf,
        }
    }
}

pub fn route_slice<'a, T: Scalar, L>(nodes: &'a [Node<T, L>], x: &[T]) -> &'a L {
    let mut at = 0;
    loop {
        match &nodes[at] {
            Node::Split { feature, threshold, left, right } => {
                at = if x[*feature] <= *threshold { *left } else { *right };
            }
            Node::Leaf(leaf) => return leaf,
        }
    }
}

/// Per-feature row orders of a training table, sorted by value (ties by row index).
pub struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new<T: Scalar>(table: &ColumnarTable<T>) -> Self {
        let n = table.n_rows();
        let order = table
            .columns()
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].partial_cmp(&col[b as usize]).expect("finite features"));
                idx
            })
            .collect();
        Self { order }
    }
}

/// Split statistics and leaf construction for one kind of tree.
pub trait Criterion<T: Scalar> {
    type Stats: Copy + Default;
    type Leaf;

    fn add(&self, stats: &mut Self::Stats, row: usize, weight: u32);
    fn diff(&self, total: &Self::Stats, left: &Self::Stats) -> Self::Stats;
    /// Whether a node with these statistics should be split at all.
    fn wants_split(&self, node: &Self::Stats) -> bool;
    /// Cost of a candidate split (lower is better); `None` when the split is not allowed.
    fn split_cost(&self, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
    /// Final acceptance of the best split found for a node.
    fn accept(&self, node: &Self::Stats, best_cost: f64) -> bool;
    fn leaf(&self, node: &Self::Stats) -> Self::Leaf;
}

#[derive(Debug, Clone, Copy)]
pub struct GrowLimits {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all, in ascending order.
    pub max_features: Option<usize>,
}

struct Best<T> {
    cost: f64,
    feature: usize,
    threshold: T,
}

/// Grows one tree on the rows with non-zero `weights`.
pub fn grow<T: Scalar, C: Criterion<T>>(
    table: &ColumnarTable<T>,
    presorted: &Presorted,
    weights: &[u32],
    criterion: &C,
    limits: GrowLimits,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Vec<Node<T, C::Leaf>> {
    let d = table.n_features();
    let mut idx: Vec<Vec<u32>> = presorted
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0).collect())
        .collect();
    let n_in = idx.first().map_or(0, Vec::len);
    let mut nodes: Vec<Node<T, C::Leaf>> = Vec::new();
    let mut go_left = vec![false; table.n_rows()];
    let mut buf: Vec<u32> = Vec::with_capacity(n_in);
    let mut features: Vec<usize> = (0..d).collect();

    let placeholder = || Node::Split { feature: 0, threshold: T::zero(), left: 0, right: 0 };
    nodes.push(placeholder());
    // (node id, lo, hi, depth)
    let mut stack = vec![(0usize, 0usize, n_in, 0usize)];

    while let Some((id, lo, hi, depth)) = stack.pop() {
        let mut total = C::Stats::default();
        if d > 0 {
            for &r in &idx[0][lo..hi] {
                criterion.add(&mut total, r as usize, weights[r as usize]);
            }
        }
        let can_split = d > 0
            && hi - lo >= limits.min_samples_split.max(2)
            && limits.max_depth.is_none_or(|m| depth < m)
            && criterion.wants_split(&total);
        let best = if can_split {
            let order: &[usize] = match (limits.max_features, rng.as_deref_mut()) {
                (Some(m), Some(rng)) if m < d => {
                    features.shuffle(rng);
                    &features
                }
                _ => {
                    features.sort_unstable();
                    &features
                }
            };
            let budget = limits.max_features.unwrap_or(d).min(d);
            find_split(table, &idx, lo, hi, &total, weights, criterion, order, budget)
        } else {
            None
        };
        let best = best.filter(|b| criterion.accept(&total, b.cost));
        let Some(best) = best else {
            nodes[id] = Node::Leaf(criterion.leaf(&total));
            continue;
        };

        let col = table.column(best.feature);
        let mut n_left = 0;
        for &r in &idx[best.feature][lo..hi] {
            let left = col[r as usize] <= best.threshold;
            go_left[r as usize] = left;
            n_left += usize::from(left);
        }
        for seg in idx.iter_mut() {
            stable_partition(&mut seg[lo..hi], &go_left, &mut buf);
        }
        let left_id = nodes.len();
        nodes.push(placeholder());
        nodes.push(placeholder());
        nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: left_id, right: left_id + 1 };
        stack.push((left_id + 1, lo + n_left, hi, depth + 1));
        stack.push((left_id, lo, lo + n_left, depth + 1));
    }
    nodes
}

#[allow(clippy::too_many_arguments)]
fn find_split<T: Scalar, C: Criterion<T>>(
    table: &ColumnarTable<T>,
    idx: &[Vec<u32>],
    lo: usize,
    hi: usize,
    total: &C::Stats,
    weights: &[u32],
    criterion: &C,
    order: &[usize],
    budget: usize,
) -> Option<Best<T>> {
    let mut best: Option<Best<T>> = None;
    let mut examined = 0;
    for &f in order {
        if examined == budget {
            break;
        }
        let col = table.column(f);
        let seg = &idx[f][lo..hi];
        if col[seg[0] as usize] == col[seg[seg.len() - 1] as usize] {
            // constant within the node: does not use up the feature budget
            continue;
        }
        examined += 1;
        let mut left = C::Stats::default();
        let mut feature_best: Option<(f64, T)> = None;
        for k in 0..seg.len() - 1 {
            let r = seg[k] as usize;
            criterion.add(&mut left, r, weights[r]);
            let (v, next) = (col[r], col[seg[k + 1] as usize]);
            if v < next {
                let right = criterion.diff(total, &left);
                if let Some(cost) = criterion.split_cost(&left, &right) {
                    if feature_best.as_ref().is_none_or(|(c, _)| cost < *c) {
                        feature_best = Some((cost, midpoint(v, next)));
                    }
                }
            }
        }
        if let Some((cost, threshold)) = feature_best {
            let better = match &best {
                None => true,
                Some(b) => cost < b.cost || (cost == b.cost && f < b.feature),
            };
            if better {
                best = Some(Best { cost, feature: f, threshold });
            }
        }
    }
    best
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let m = lo + (hi - lo) / (T::one() + T::one());
    if m < hi {
        m
    } else {
        lo
    }
}

fn stable_partition(seg: &mut [u32], go_left: &[bool], buf: &mut Vec<u32>) {
    buf.clear();
    let mut w = 0;
    for i in 0..seg.len() {
        let r = seg[i];
        if go_left[r as usize] {
            seg[w] = r;
            w += 1;
        } else {
            buf.push(r);
        }
    }
    seg[w..].copy_from_slice(buf);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_stays_between_neighbours() {
        assert_eq!(midpoint(1.0f64, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
    }

    #[test]
    fn stable_partition_keeps_relative_order() {
        let mut seg = vec![5, 1, 4, 2, 3, 0];
        let go_left = [true, false, true, false, true, false];
        let mut buf = Vec::new();
        stable_partition(&mut seg, &go_left, &mut buf);
        assert_eq!(seg, vec![4, 2, 0, 5, 1, 3]);
    }
}
