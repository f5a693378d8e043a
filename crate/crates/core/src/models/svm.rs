//! Linear SVM trained by averaged stochastic sub-gradient descent with steps
//! `1/(lambda t + 1/eta0)`, projected onto the ball holding the optimum. The
//! bias is an extra, regularised weight on a constant input. The descent is
//! repeated for a fixed set of `eta0` and the lowest objective wins.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ModelSpec, Task};
use crate::rng::rng_for;

/// Candidate initial steps; the run with the lowest final objective is kept.
const INITIAL_STEPS: [f64; 7] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Added to regression outputs; the mean training target.
    pub offset: f64,
}

impl LinearSvm {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    pub fn predict_row(&self, task: Task, row: &[f64]) -> f64 {
        let m = self.margin(row);
        match task {
            Task::Regress => m + self.offset,
            Task::Classify => {
                if m >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `lambda/2 |w|^2 + mean loss`, with the bias counted in `w`.
    pub fn objective(&self, task: Task, x: ArrayView2<f64>, y: &[f64], lambda: f64, epsilon: f64) -> f64 {
        let reg = 0.5 * lambda * (self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias);
        let n = y.len() as f64;
        let data: f64 = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(r, &t)| {
                let m = self.margin(r.as_slice().expect("standard layout"));
                match task {
                    Task::Classify => (1.0 - signed(t) * m).max(0.0),
                    Task::Regress => ((t - self.offset - m).abs() - epsilon).max(0.0),
                }
            })
            .sum();
        reg + data / n
    }
}

fn signed(t: f64) -> f64 {
    if t > 0.5 {
        1.0
    } else {
        -1.0
    }
}

pub(super) fn fit(spec: &ModelSpec, x: ArrayView2<f64>, y: &[f64]) -> LinearSvm {
    let n = x.nrows();
    let offset = match spec.task {
        Task::Classify => 0.0,
        Task::Regress => y.iter().sum::<f64>() / n as f64,
    };
    let rows: Vec<Vec<f64>> = x
        .rows()
        .into_iter()
        .map(|r| r.iter().copied().chain(std::iter::once(1.0)).collect())
        .collect();
    let mut best: Option<(f64, LinearSvm)> = None;
    for eta0 in INITIAL_STEPS {
        let mut w = descend(spec, &rows, y, offset, eta0);
        let bias = w.pop().unwrap_or(0.0);
        let model = LinearSvm {
            weights: w,
            bias,
            offset,
        };
        let obj = model.objective(spec.task, x, y, spec.lambda, spec.epsilon);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, model));
        }
    }
    best.expect("at least one step size").1
}

/// One averaged SGD run; returns the augmented weights (bias last).
fn descend(spec: &ModelSpec, rows: &[Vec<f64>], y: &[f64], offset: f64, eta0: f64) -> Vec<f64> {
    let n = rows.len();
    let lambda = spec.lambda;
    // The optimum satisfies lambda/2 |w|^2 <= objective(0); iterates are kept in that ball.
    let zero_loss = match spec.task {
        Task::Classify => 1.0,
        Task::Regress => {
            y.iter()
                .map(|t| ((t - offset).abs() - spec.epsilon).max(0.0))
                .sum::<f64>()
                / n as f64
        }
    };
    let radius = (2.0 * zero_loss / lambda).sqrt();
    let dim = rows[0].len();
    let mut w = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut averaged = 0usize;
    let average_from = spec.epochs / 2;
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for epoch in 0..spec.epochs {
        let mut rng = rng_for(spec.seed, &[epoch as u64]);
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64 + 1.0 / eta0);
            let m: f64 = w.iter().zip(&rows[i]).map(|(w, x)| w * x).sum();
            let g = match spec.task {
                Task::Classify => {
                    let s = signed(y[i]);
                    if s * m < 1.0 {
                        s
                    } else {
                        0.0
                    }
                }
                Task::Regress => {
                    let r = y[i] - offset - m;
                    if r > spec.epsilon {
                        1.0
                    } else if r < -spec.epsilon {
                        -1.0
                    } else {
                        0.0
                    }
                }
            };
            let shrink = 1.0 - eta * lambda;
            for (wj, xj) in w.iter_mut().zip(&rows[i]) {
                *wj = shrink * *wj + eta * g * xj;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let scale = radius / norm;
                w.iter_mut().for_each(|v| *v *= scale);
            }
            if epoch >= average_from {
                averaged += 1;
                let k = averaged as f64;
                for (a, wj) in avg.iter_mut().zip(&w) {
                    *a += (wj - *a) / k;
                }
            }
        }
    }
    avg
}
