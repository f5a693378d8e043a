//! Diagonal-covariance Gaussian mixture over NMF coefficient columns, fitted
//! by EM from a seeded k-means++ start, and posterior-based kineme assignment.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Lower bound applied to every variance entry.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Components whose weight drops below this are re-seeded.
pub const COLLAPSE_WEIGHT: f64 = 1e-8;
const MAX_RESEEDS: usize = 3;
const KMEANS_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub components: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: 16,
            tol: 1e-6,
            max_iter: 300,
        }
    }
}

/// One-based kineme label, `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KinemeLabel(usize);

impl KinemeLabel {
    /// Label for zero-based component `index`.
    pub fn from_index(index: usize) -> Self {
        KinemeLabel(index + 1)
    }

    /// Validates a one-based label against `k` components.
    pub fn new(label: usize, k: usize) -> Result<Self> {
        if label == 0 || label > k {
            return Err(Error::Contract(format!("kineme label {label} outside 1..={k}")));
        }
        Ok(KinemeLabel(label))
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for KinemeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    /// `q x k`; column `j` is the mean of component `j`.
    pub means: Array2<f64>,
    /// `q x k` diagonal variances.
    pub variances: Array2<f64>,
    pub weights: Array1<f64>,
    /// Log-likelihood after every accepted EM iteration (since the last re-seed).
    pub loglik_trace: Vec<f64>,
    /// Log-likelihood of the returned (clamped) parameters.
    pub final_loglik: f64,
    /// Number of mean entries clamped to zero after fitting.
    pub clamped_entries: usize,
    pub reseeds: usize,
    pub warnings: Vec<String>,
    pub seed: u64,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.nrows()
    }

    fn log_density(&self, x: ArrayView1<f64>, j: usize) -> f64 {
        log_normal_diag(x, self.means.column(j), self.variances.column(j))
    }

    /// `log w_j + log N(x; mu_j, Sigma_j)` for every component.
    pub fn log_joint(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(self.components(), |j| self.weights[j].ln() + self.log_density(x, j))
    }

    /// Posterior component probabilities for `x`.
    pub fn responsibilities(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let lj = self.log_joint(x);
        let lse = log_sum_exp(lj.view());
        lj.mapv(|v| (v - lse).exp())
    }

    /// Maximum-posterior component; ties go to the lowest index.
    pub fn assign(&self, x: ArrayView1<f64>) -> KinemeLabel {
        let lj = self.log_joint(x);
        let mut best = 0;
        for j in 1..lj.len() {
            if lj[j] > lj[best] {
                best = j;
            }
        }
        KinemeLabel::from_index(best)
    }

    pub fn log_likelihood(&self, data: ArrayView2<f64>) -> f64 {
        data.columns()
            .into_iter()
            .map(|x| log_sum_exp(self.log_joint(x).view()))
            .sum()
    }
}

/// Maximum-posterior kineme for a coefficient vector.
pub fn assign_kineme(model: &GmmModel, coefficients: ArrayView1<f64>) -> KinemeLabel {
    model.assign(coefficients)
}

fn log_normal_diag(x: ArrayView1<f64>, mean: ArrayView1<f64>, var: ArrayView1<f64>) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean.iter()).zip(var.iter()) {
        let d = xi - mi;
        acc += ln_2pi + vi.ln() + d * d / vi;
    }
    -0.5 * acc
}

fn log_sum_exp(v: ArrayView1<f64>) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ followed by a few Lloyd refinements. Returns `q x k`
/// centers and the final assignment.
fn kmeans_init(data: ArrayView2<f64>, k: usize, rng: &mut impl Rng) -> (Array2<f64>, Vec<usize>) {
    let (q, n) = data.dim();
    let mut centers = Array2::zeros((q, k));
    let first = rng.random_range(0..n);
    centers.column_mut(0).assign(&data.column(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.column(i), centers.column(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.column_mut(c).assign(&data.column(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.column(i), centers.column(c)));
        }
    }

    let mut assignment = vec![0usize; n];
    for step in 0..=KMEANS_STEPS {
        for (i, a) in assignment.iter_mut().enumerate() {
            let x = data.column(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(x, centers.column(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            *a = best;
        }
        if step == KMEANS_STEPS {
            break;
        }
        let mut sums = Array2::<f64>::zeros((q, k));
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            let mut col = sums.column_mut(a);
            col += &data.column(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                centers.column_mut(c).assign(&sums.column(c).mapv(|v| v / count as f64));
            }
        }
    }
    (centers, assignment)
}

struct Params {
    means: Array2<f64>,
    variances: Array2<f64>,
    weights: Array1<f64>,
}

impl Params {
    fn as_model(&self) -> GmmModel {
        GmmModel {
            means: self.means.clone(),
            variances: self.variances.clone(),
            weights: self.weights.clone(),
            loglik_trace: Vec::new(),
            final_loglik: f64::NAN,
            clamped_entries: 0,
            reseeds: 0,
            warnings: Vec::new(),
            seed: 0,
        }
    }
}

/// Log-likelihood and `n x k` responsibilities.
fn e_step(params: &Params, data: ArrayView2<f64>) -> (f64, Array2<f64>, Array1<f64>) {
    let model = params.as_model();
    let n = data.ncols();
    let k = params.weights.len();
    let mut resp = Array2::zeros((n, k));
    let mut point_ll = Array1::zeros(n);
    let mut ll = 0.0;
    for (i, x) in data.columns().into_iter().enumerate() {
        let lj = model.log_joint(x);
        let lse = log_sum_exp(lj.view());
        point_ll[i] = lse;
        ll += lse;
        for j in 0..k {
            resp[[i, j]] = (lj[j] - lse).exp();
        }
    }
    (ll, resp, point_ll)
}

fn m_step(resp: &Array2<f64>, data: ArrayView2<f64>) -> Params {
    let (q, n) = data.dim();
    let k = resp.ncols();
    let nk = resp.sum_axis(ndarray::Axis(0));
    let mut means = Array2::zeros((q, k));
    let mut variances = Array2::zeros((q, k));
    for j in 0..k {
        if nk[j] <= 0.0 {
            continue;
        }
        let mut mean = Array1::<f64>::zeros(q);
        for i in 0..n {
            mean.scaled_add(resp[[i, j]], &data.column(i));
        }
        mean /= nk[j];
        let mut var = Array1::<f64>::zeros(q);
        for i in 0..n {
            let r = resp[[i, j]];
            for d in 0..q {
                let diff = data[[d, i]] - mean[d];
                var[d] += r * diff * diff;
            }
        }
        var /= nk[j];
        means.column_mut(j).assign(&mean);
        variances.column_mut(j).assign(&var.mapv(|v| v.max(VARIANCE_FLOOR)));
    }
    let weights = nk.mapv(|v| v / n as f64);
    Params {
        means,
        variances,
        weights,
    }
}

fn global_variance(data: ArrayView2<f64>) -> Array1<f64> {
    let n = data.ncols() as f64;
    let mean = data.sum_axis(ndarray::Axis(1)) / n;
    let mut var = Array1::<f64>::zeros(data.nrows());
    for x in data.columns() {
        for d in 0..var.len() {
            let diff = x[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    (var / n).mapv(|v| v.max(VARIANCE_FLOOR))
}

/// Fits a `k`-component diagonal GMM to the columns of `data` (`q x n`).
pub fn fit_gmm(data: ArrayView2<f64>, k: usize, seed: u64, tol: f64, max_iter: usize) -> Result<GmmModel> {
    let (q, n) = data.dim();
    if k == 0 {
        return Err(Error::Config("GMM needs at least one component".into()));
    }
    if n < k {
        return Err(Error::Config(format!(
            "GMM with {k} components needs at least {k} points, got {n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("GMM input contains non-finite values".into()));
    }

    let mut rng = rng_for(seed, &[0x676d6d]);
    let (centers, assignment) = kmeans_init(data, k, &mut rng);
    let global = global_variance(data);

    let mut counts = vec![0usize; k];
    for &a in &assignment {
        counts[a] += 1;
    }
    let mut variances = Array2::zeros((q, k));
    for c in 0..k {
        if counts[c] < 2 {
            variances.column_mut(c).assign(&global);
            continue;
        }
        let mut var = Array1::<f64>::zeros(q);
        for (i, &a) in assignment.iter().enumerate() {
            if a == c {
                for d in 0..q {
                    let diff = data[[d, i]] - centers[[d, c]];
                    var[d] += diff * diff;
                }
            }
        }
        variances
            .column_mut(c)
            .assign(&(var / counts[c] as f64).mapv(|v| v.max(VARIANCE_FLOOR)));
    }
    let mut weights = Array1::from_iter(counts.iter().map(|&c| (c as f64).max(1.0)));
    weights /= weights.sum();
    let mut params = Params {
        means: centers,
        variances,
        weights,
    };

    let mut warnings = Vec::new();
    let mut reseeds = 0usize;
    let (mut ll, mut resp, _) = e_step(&params, data);
    let mut trace = vec![ll];
    for _ in 0..max_iter {
        let mut next = m_step(&resp, data);
        let collapsed: Vec<usize> = (0..k).filter(|&j| next.weights[j] < COLLAPSE_WEIGHT).collect();
        if !collapsed.is_empty() {
            if reseeds < MAX_RESEEDS {
                reseeds += 1;
                let (_, _, point_ll) = e_step(&next, data);
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]));
                for (&j, &i) in collapsed.iter().zip(order.iter()) {
                    next.means.column_mut(j).assign(&data.column(i));
                    next.variances.column_mut(j).assign(&global);
                    next.weights[j] = 1.0 / n as f64;
                }
                let total = next.weights.sum();
                next.weights /= total;
                params = next;
                let (l, r, _) = e_step(&params, data);
                ll = l;
                resp = r;
                trace = vec![ll];
                continue;
            }
            warnings.push(format!(
                "{} degenerate component(s) remain after {MAX_RESEEDS} re-seeds",
                collapsed.len()
            ));
            break;
        }
        let (next_ll, next_resp, _) = e_step(&next, data);
        if next_ll < ll {
            break;
        }
        let improvement = (next_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        params = next;
        ll = next_ll;
        resp = next_resp;
        trace.push(ll);
        if improvement < tol {
            break;
        }
    }

    let mut clamped_entries = 0;
    params.means.mapv_inplace(|v| {
        if v < 0.0 {
            clamped_entries += 1;
            0.0
        } else {
            v
        }
    });
    let mut model = params.as_model();
    model.final_loglik = model.log_likelihood(data);
    model.loglik_trace = trace;
    model.clamped_entries = clamped_entries;
    model.reseeds = reseeds;
    model.warnings = warnings;
    model.seed = seed;
    Ok(model)
}
