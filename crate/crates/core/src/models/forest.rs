use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Criterion, Tree, TreeParams};
use super::{ModelSpec, Task};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

pub(super) fn default_max_features(task: Task, d: usize) -> usize {
    match task {
        Task::Classify => ((d as f64).sqrt().floor() as usize).max(1),
        Task::Regress => (d / 3).max(1),
    }
}

pub(super) fn fit(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> Forest {
    let n = x.nrows();
    let params = TreeParams {
        criterion: match spec.task {
            Task::Classify => Criterion::Gini,
            Task::Regress => Criterion::Variance,
        },
        max_depth: spec.max_depth,
        min_samples_leaf: spec.min_samples_leaf,
        max_features: spec
            .max_features
            .unwrap_or_else(|| default_max_features(spec.task, x.ncols())),
    };
    let trees = (0..spec.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(spec.seed, &[t as u64]);
            let idx = if spec.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(x, y, idx, params, &mut rng).0
        })
        .collect();
    Forest { trees }
}

impl Forest {
    pub fn predict_row(&self, task: Task, row: &[f64]) -> f64 {
        match task {
            Task::Classify => {
                let high = self.trees.iter().filter(|t| t.predict_row(row) > 0.5).count();
                if 2 * high >= self.trees.len() {
                    1.0
                } else {
                    0.0
                }
            }
            Task::Regress => self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64,
        }
    }
}
