use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Criterion, Node, Tree, TreeParams};
use super::{ModelSpec, Task};
use crate::rng::rng_for;

/// Stagewise additive trees. For classification the score is a log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training loss after the base score and after each stage.
    pub loss_trace: Vec<f64>,
}

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

fn loss(task: Task, y: &[f64], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Regress => y.iter().zip(f).map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / n,
        // log(1 + e^f) - y f, computed stably
        Task::Classify => {
            y.iter()
                .zip(f)
                .map(|(y, f)| f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f)
                .sum::<f64>()
                / n
        }
    }
}

pub(super) fn fit(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> Boosted {
    let n = y.len();
    let base = match spec.task {
        Task::Regress => y[0] + y.iter().map(|v| v - y[0]).sum::<f64>() / n as f64,
        Task::Classify => {
            let p = (y.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };
    let params = TreeParams {
        criterion: Criterion::Variance,
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        max_features: spec.max_features.unwrap_or(x.ncols()),
    };
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut f = vec![base; n];
    let mut loss_trace = vec![loss(spec.task, y, &f)];
    let mut trees = Vec::with_capacity(spec.trees);
    let take = ((spec.subsample * n as f64).round() as usize).clamp(1, n);

    for stage in 0..spec.trees {
        let mut rng = rng_for(spec.seed, &[stage as u64]);
        let residual: Vec<f64> = match spec.task {
            Task::Regress => y.iter().zip(&f).map(|(y, f)| y - f).collect(),
            Task::Classify => y.iter().zip(&f).map(|(y, f)| y - sigmoid(*f)).collect(),
        };
        let mut idx = sample(&mut rng, n, take).into_vec();
        idx.sort_unstable();
        let (mut tree, _) = fit_tree(x, &residual, idx, params, &mut rng);

        // Leaf values are refit on every training row, not just the subsample.
        let leaf_of: Vec<usize> = rows.iter().map(|r| tree.leaf_index(r)).collect();
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        for i in 0..n {
            num[leaf_of[i]] += residual[i];
            den[leaf_of[i]] += match spec.task {
                Task::Regress => 1.0,
                Task::Classify => {
                    let p = sigmoid(f[i]);
                    p * (1.0 - p)
                }
            };
        }
        for node in 0..tree.nodes.len() {
            if matches!(tree.nodes[node], Node::Leaf { .. }) {
                let v = if den[node] > 1e-12 { num[node] / den[node] } else { 0.0 };
                tree.set_leaf(node, v);
            }
        }
        for i in 0..n {
            f[i] += spec.learning_rate * tree.predict_row(&rows[i]);
        }
        loss_trace.push(loss(spec.task, y, &f));
        trees.push(tree);
    }
    Boosted {
        base,
        learning_rate: spec.learning_rate,
        trees,
        loss_trace,
    }
}

impl Boosted {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .fold(self.base, |acc, t| acc + self.learning_rate * t.predict_row(row))
    }

    pub fn predict_row(&self, task: Task, row: &[f64]) -> f64 {
        let s = self.score(row);
        match task {
            Task::Regress => s,
            Task::Classify => {
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}
