//! Non-negative matrix factorisation of the pooled segment matrix and
//! non-negative projection of new segments onto a learned basis.
//!
//! Fitting minimises `||H - B C||_F^2` over `B, C >= 0` with Lee–Seung
//! multiplicative updates. Each update can only lower the objective, so the
//! recorded trace is non-increasing; an iteration that rounding pushes upward
//! is discarded and ends the fit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::rng::rng_for;

/// Guards divisions in the update rules.
pub const UPDATE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmfConfig {
    pub rank: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            rank: 16,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// A fitted basis with its optimisation history.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel {
    /// `m x q` basis with unit-L2 columns.
    pub basis: Array2<f64>,
    /// Objective after initialisation and after every accepted iteration.
    pub objective_trace: Vec<f64>,
    pub seed: u64,
}

impl NmfModel {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn projector(&self) -> Projector {
        Projector::new(self.basis.clone())
    }
}

fn frobenius_sq(h: &ArrayView2<f64>, b: &Array2<f64>, c: &Array2<f64>) -> f64 {
    let bc = b.dot(c);
    h.iter().zip(bc.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Factorises non-negative `h` (`m x n`) into a rank-`rank` basis and
/// coefficients `C` (`q x n`).
pub fn fit_nmf(
    h: ArrayView2<f64>,
    rank: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<(NmfModel, Array2<f64>)> {
    let (m, n) = h.dim();
    if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Contract("NMF input must be finite and non-negative".into()));
    }
    if rank == 0 || rank > m.min(n) {
        return Err(Error::Config(format!(
            "NMF rank {rank} must lie in 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    if max_iter == 0 {
        return Err(Error::Config("NMF max_iter must be at least 1".into()));
    }

    let mut rng = rng_for(seed, &[0x6e6d66]);
    let mut b = Array2::from_shape_simple_fn((m, rank), || rng.random_range(0.1..1.1));
    let mut c = Array2::from_shape_simple_fn((rank, n), || rng.random_range(0.1..1.1));

    if h.iter().all(|v| *v == 0.0) {
        normalise_columns(&mut b, None);
        let model = NmfModel {
            basis: b,
            objective_trace: vec![0.0],
            seed,
        };
        return Ok((model, Array2::zeros((rank, n))));
    }

    let mut objective = frobenius_sq(&h, &b, &c);
    let mut trace = vec![objective];
    for _ in 0..max_iter {
        let prev_b = b.clone();
        let prev_c = c.clone();

        let num = b.t().dot(&h);
        let den = b.t().dot(&b).dot(&c);
        c.zip_mut_with(&num, |x, &nu| *x *= nu);
        c.zip_mut_with(&den, |x, &de| *x /= de + UPDATE_EPSILON);

        let num = h.dot(&c.t());
        let den = b.dot(&c.dot(&c.t()));
        b.zip_mut_with(&num, |x, &nu| *x *= nu);
        b.zip_mut_with(&den, |x, &de| *x /= de + UPDATE_EPSILON);

        let next = frobenius_sq(&h, &b, &c);
        if next > objective {
            b = prev_b;
            c = prev_c;
            break;
        }
        let improvement = (objective - next) / objective.max(f64::MIN_POSITIVE);
        objective = next;
        trace.push(objective);
        if objective == 0.0 || improvement < tol {
            break;
        }
    }

    normalise_columns(&mut b, Some(&mut c));
    Ok((
        NmfModel {
            basis: b,
            objective_trace: trace,
            seed,
        },
        c,
    ))
}

/// Scales basis columns to unit L2 norm, moving the scale into the matching
/// coefficient rows.
fn normalise_columns(b: &mut Array2<f64>, mut c: Option<&mut Array2<f64>>) {
    for j in 0..b.ncols() {
        let norm = b.column(j).dot(&b.column(j)).sqrt();
        if norm > 0.0 {
            b.column_mut(j).mapv_inplace(|v| v / norm);
            if let Some(c) = c.as_deref_mut() {
                c.row_mut(j).mapv_inplace(|v| v * norm);
            }
        }
    }
}

/// Result of projecting one segment onto a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Array1<f64>,
    /// `||h - B c||_2`
    pub residual: f64,
}

impl Projection {
    pub fn objective(&self) -> f64 {
        self.residual * self.residual
    }
}

/// Non-negative least-squares projector for a fixed basis.
///
/// Caches `B^T B` so repeated projections cost `O(m q + q^2)` per update.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Array2<f64>,
    gram: Array2<f64>,
}

const PROJECT_TOL: f64 = 1e-8;
const PROJECT_MAX_ITER: usize = 300;

impl Projector {
    pub fn new(basis: Array2<f64>) -> Self {
        let gram = basis.t().dot(&basis);
        Projector { basis, gram }
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn project(&self, h: ArrayView1<f64>) -> Result<Projection> {
        let (m, q) = self.basis.dim();
        if h.len() != m {
            return Err(Error::Contract(format!(
                "segment has length {}, basis expects {m}",
                h.len()
            )));
        }
        if h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Contract(
                "projected segment must be finite and non-negative".into(),
            ));
        }
        let bth = self.basis.t().dot(&h);
        if bth.iter().all(|v| *v <= 0.0) {
            // c = 0 satisfies the optimality conditions
            let coefficients = Array1::zeros(q);
            return Ok(self.finish(h, coefficients));
        }

        // uniform start at the best common scale
        let ones = Array1::<f64>::ones(q);
        let denom = ones.dot(&self.gram.dot(&ones));
        let start = if denom > 0.0 { bth.sum() / denom } else { 1.0 };
        let mut c = Array1::from_elem(q, if start > 0.0 { start } else { 1.0 });

        let hh = h.dot(&h);
        let objective = |c: &Array1<f64>| hh - 2.0 * c.dot(&bth) + c.dot(&self.gram.dot(c));
        let mut current = objective(&c);
        for _ in 0..PROJECT_MAX_ITER {
            let den = self.gram.dot(&c);
            for ((ci, nu), de) in c.iter_mut().zip(bth.iter()).zip(den.iter()) {
                *ci *= nu / (de + UPDATE_EPSILON);
            }
            let next = objective(&c);
            let improvement = (current - next) / current.abs().max(hh * f64::EPSILON).max(f64::MIN_POSITIVE);
            current = next;
            if improvement < PROJECT_TOL {
                break;
            }
        }

        let mu = self.finish(h, c.clone());
        match self.active_set_polish(c, &bth) {
            Some(polished) => {
                let polished = self.finish(h, polished);
                if polished.residual <= mu.residual {
                    Ok(polished)
                } else {
                    Ok(mu)
                }
            }
            None => Ok(mu),
        }
    }

    fn finish(&self, h: ArrayView1<f64>, coefficients: Array1<f64>) -> Projection {
        let r = &h - &self.basis.dot(&coefficients);
        Projection {
            residual: r.dot(&r).sqrt(),
            coefficients,
        }
    }

    /// Lawson–Hanson active-set iterations on the normal equations, started
    /// from the support the multiplicative updates identified. Multiplicative
    /// updates only approach a boundary optimum at rate `1/t`; this step lands
    /// on it exactly.
    fn active_set_polish(&self, start: Array1<f64>, bth: &Array1<f64>) -> Option<Array1<f64>> {
        let q = start.len();
        let peak = start.iter().copied().fold(0.0, f64::max);
        let mut passive: Vec<bool> = start.iter().map(|&v| v > 1e-6 * peak).collect();
        let mut x = start;
        for (xi, p) in x.iter_mut().zip(&passive) {
            if !p {
                *xi = 0.0;
            }
        }
        let grad_tol = 1e-12 * bth.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);

        for _ in 0..(3 * q + 3) {
            // inner loop: solve on the passive set, step back while infeasible
            loop {
                let idx: Vec<usize> = (0..q).filter(|&i| passive[i]).collect();
                if idx.is_empty() {
                    x.fill(0.0);
                    break;
                }
                let g = self.gram.select(Axis(0), &idx).select(Axis(1), &idx);
                let f = bth.select(Axis(0), &idx);
                let z = solve_spd(&g, &f)?;
                if z.iter().all(|&v| v > 0.0) {
                    x.fill(0.0);
                    for (&i, &v) in idx.iter().zip(z.iter()) {
                        x[i] = v;
                    }
                    break;
                }
                let mut alpha = f64::INFINITY;
                for (&i, &zi) in idx.iter().zip(z.iter()) {
                    if zi <= 0.0 {
                        let denom = x[i] - zi;
                        if denom > 0.0 {
                            alpha = alpha.min(x[i] / denom);
                        }
                    }
                }
                if !alpha.is_finite() {
                    alpha = 0.0;
                }
                for (&i, &zi) in idx.iter().zip(z.iter()) {
                    x[i] += alpha * (zi - x[i]);
                    if x[i] <= 1e-15 * peak.max(1.0) {
                        x[i] = 0.0;
                        passive[i] = false;
                    }
                }
            }
            let w = bth - &self.gram.dot(&x);
            let candidate = (0..q).filter(|&i| !passive[i]).max_by(|&a, &b| w[a].total_cmp(&w[b]));
            match candidate {
                Some(i) if w[i] > grad_tol => passive[i] = true,
                _ => return Some(x),
            }
        }
        Some(x)
    }
}

/// Projects one segment onto `basis` under a non-negativity constraint.
pub fn project_segment(basis: ArrayView2<f64>, h: ArrayView1<f64>) -> Result<Projection> {
    Projector::new(basis.to_owned()).project(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn rank_one_is_recovered() {
        let b = array![1.0, 2.0, 0.5, 3.0, 0.0, 1.5];
        let c = array![0.3, 1.0, 2.0, 0.7, 1.1];
        let h = b.view().insert_axis(Axis(1)).dot(&c.view().insert_axis(Axis(0)));
        let (model, coef) = fit_nmf(h.view(), 1, 3, 1e-12, 2000).unwrap();
        let residual = frobenius_sq(&h.view(), &model.basis, &coef);
        let norm_sq: f64 = h.iter().map(|v| v * v).sum();
        assert!(residual < 1e-6 * norm_sq, "residual {residual}");
        assert!((model.basis.column(0).dot(&model.basis.column(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let h = Array2::<f64>::zeros((6, 4));
        let (model, c) = fit_nmf(h.view(), 2, 0, 1e-6, 10).unwrap();
        assert_eq!(model.objective_trace, vec![0.0]);
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_matrix(&mut rng, 10, 20);
        let (a, _) = fit_nmf(h.view(), 3, 11, 1e-6, 100).unwrap();
        let (b, _) = fit_nmf(h.view(), 3, 11, 1e-6, 100).unwrap();
        assert_eq!(a.basis, b.basis);
        let (c, _) = fit_nmf(h.view(), 3, 12, 1e-6, 100).unwrap();
        assert_ne!(a.basis, c.basis);
    }

    #[test]
    fn trace_monotone_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_matrix(&mut rng, 12, 30);
        let (model, c) = fit_nmf(h.view(), 4, 1, 0.0, 200).unwrap();
        for w in model.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        assert!(model.basis.iter().all(|&v| v >= 0.0));
        assert!(c.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn invalid_inputs() {
        let h = array![[1.0, -1.0], [0.0, 1.0]];
        assert!(matches!(fit_nmf(h.view(), 1, 0, 1e-6, 10), Err(Error::Contract(_))));
        let h = Array2::<f64>::ones((3, 5));
        assert!(matches!(fit_nmf(h.view(), 4, 0, 1e-6, 10), Err(Error::Config(_))));
        assert!(matches!(fit_nmf(h.view(), 0, 0, 1e-6, 10), Err(Error::Config(_))));
    }

    #[test]
    fn projecting_a_basis_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = random_matrix(&mut rng, 8, 3);
        normalise_columns(&mut b, None);
        for j in 0..3 {
            let p = project_segment(b.view(), b.column(j)).unwrap();
            assert!(p.residual < 1e-6, "residual {}", p.residual);
            for (i, v) in p.coefficients.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn projecting_zero() {
        let b = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let p = project_segment(b.view(), Array1::zeros(3).view()).unwrap();
        assert!(p.coefficients.iter().all(|&v| v == 0.0));
        assert_eq!(p.residual, 0.0);
    }

    #[test]
    fn projection_dimension_mismatch() {
        let b = Array2::<f64>::ones((4, 2));
        assert!(matches!(
            project_segment(b.view(), Array1::ones(5).view()),
            Err(Error::Contract(_))
        ));
    }

    /// Exhaustive 0.01 grid over [0, 3]^2.
    fn grid_oracle(b: &Array2<f64>, h: &Array1<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=300 {
            for j in 0..=300 {
                let c = array![i as f64 * 0.01, j as f64 * 0.01];
                let r = h - &b.dot(&c);
                best = best.min(r.dot(&r));
            }
        }
        best
    }

    #[test]
    fn projection_beats_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let mut b = random_matrix(&mut rng, 6, 2);
            normalise_columns(&mut b, None);
            let h = Array::from_shape_simple_fn(6, || rng.random_range(0.0..2.0));
            let p = project_segment(b.view(), h.view()).unwrap();
            assert!(p.coefficients.iter().all(|&v| v >= 0.0));
            assert!(p.objective() <= grid_oracle(&b, &h) + 1e-6);
        }
    }

    #[test]
    fn projection_scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let mut b = random_matrix(&mut rng, 10, 4);
            normalise_columns(&mut b, None);
            let h = Array::from_shape_simple_fn(10, || rng.random_range(0.0..5.0));
            let alpha = rng.random_range(0.1..10.0);
            let p1 = project_segment(b.view(), h.view()).unwrap();
            let p2 = project_segment(b.view(), (&h * alpha).view()).unwrap();
            let expected = alpha * alpha * p1.objective();
            assert!((p2.objective() - expected).abs() <= 1e-9 * (1.0 + expected));
        }
    }
}
