//! CART trees: Gini impurity for 0/1 targets, variance otherwise.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn (without replacement) at each node.
    pub max_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn set_leaf(&mut self, node: usize, value: f64) {
        self.nodes[node] = Node::Leaf { value };
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

/// Leaf value for a set of targets: majority (ties to 1) or mean.
fn leaf_value(criterion: Criterion, y: &[f64], idx: &[usize]) -> f64 {
    match criterion {
        Criterion::Gini => {
            let pos = idx.iter().filter(|&&i| y[i] > 0.5).count();
            if 2 * pos >= idx.len() {
                1.0
            } else {
                0.0
            }
        }
        Criterion::Variance => {
            let first = y[idx[0]];
            first + idx.iter().map(|&i| y[i] - first).sum::<f64>() / idx.len() as f64
        }
    }
}

/// Impurity times node size, from running sums.
fn weighted_impurity(criterion: Criterion, n: f64, sum: f64, sum_sq: f64) -> f64 {
    match criterion {
        Criterion::Gini => {
            let p = sum / n;
            2.0 * n * p * (1.0 - p)
        }
        Criterion::Variance => (sum_sq - sum * sum / n).max(0.0),
    }
}

struct Builder<'a, R> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    leaves: Vec<(usize, Vec<usize>)>,
}

impl<R: Rng> Builder<'_, R> {
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.x.ncols();
        let crit = self.params.criterion;
        let n = idx.len() as f64;
        let (sum, sum_sq) = idx
            .iter()
            .fold((0.0, 0.0), |(s, q), &i| (s + self.y[i], q + self.y[i] * self.y[i]));
        let parent = weighted_impurity(crit, n, sum, sum_sq);
        if parent <= 1e-12 {
            return None;
        }
        let mut features = sample(self.rng, d, self.params.max_features.min(d)).into_vec();
        features.sort_unstable();
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let yi = self.y[order[k]];
                ls += yi;
                lq += yi * yi;
                let nl = k + 1;
                let nr = order.len() - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[[order[k], f]], self.x[[order[k + 1], f]]);
                if a == b {
                    continue;
                }
                let child = weighted_impurity(crit, nl as f64, ls, lq)
                    + weighted_impurity(crit, nr as f64, sum - ls, sum_sq - lq);
                // Zero-gain splits are kept so impure nodes can still be separated.
                let gain = parent - child;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    let mut t = 0.5 * (a + b);
                    if t >= b {
                        t = a;
                    }
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: leaf_value(self.params.criterion, self.y, &idx),
        });
        let can_split =
            self.params.max_depth.is_none_or(|m| depth < m) && idx.len() >= 2 * self.params.min_samples_leaf;
        let split = if can_split { self.best_split(&idx) } else { None };
        match split {
            None => self.leaves.push((id, idx)),
            Some((feature, threshold, _)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }
}

/// Fits a tree on the rows `idx` (repeats allowed) and returns it with the
/// training rows that reached each leaf, keyed by node index.
pub fn fit_tree<R: Rng>(
    x: ArrayView2<f64>,
    y: &[f64],
    idx: Vec<usize>,
    params: TreeParams,
    rng: &mut R,
) -> (Tree, Vec<(usize, Vec<usize>)>) {
    assert!(!idx.is_empty());
    let mut b = Builder {
        x,
        y,
        params,
        rng,
        nodes: Vec::new(),
        leaves: Vec::new(),
    };
    b.grow(idx, 0);
    (Tree { nodes: b.nodes }, b.leaves)
}
