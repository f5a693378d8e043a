use kineme::models::{load_model, save_model, train, train_normalised, Family, ModelSpec, Params, Task};
use kineme::{Error, ErrorKind};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(n_per: usize, gap_sigma: f64, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Array2::zeros((2 * n_per, 2));
    let mut y = Vec::new();
    for i in 0..2 * n_per {
        let c = (i % 2) as f64;
        x[[i, 0]] = c * gap_sigma + noise.sample(&mut rng);
        x[[i, 1]] = c * gap_sigma + noise.sample(&mut rng);
        y.push(c);
    }
    (x, y)
}

fn accuracy(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Points with well separated centres never come closer than the margin
/// when noise is truncated, so separation is guaranteed.
fn separable(seed: u64) -> (Array2<f64>, Vec<f64>) {
    let (mut x, y) = blobs(50, 10.0, seed);
    for (mut r, &c) in x.axis_iter_mut(Axis(0)).zip(&y) {
        let centre = c * 10.0;
        r.mapv_inplace(|v| v.clamp(centre - 2.4, centre + 2.4));
    }
    (x, y)
}

#[test]
fn svm_separates_blobs() {
    let (x, y) = separable(1);
    let model = train(&ModelSpec::new(Family::Svm, Task::Classify, 3), x.view(), &y).unwrap();
    assert_eq!(accuracy(&model.predict(x.view()).unwrap(), &y), 1.0);
}

#[test]
fn every_family_fits_blobs() {
    let (x, y) = separable(2);
    for family in Family::ALL {
        let model = train_normalised(&ModelSpec::new(family, Task::Classify, 5), x.view(), &y).unwrap();
        assert_eq!(accuracy(&model.predict(x.view()).unwrap(), &y), 1.0, "{family}");
    }
}

#[test]
fn constant_regression_target() {
    let (x, _) = blobs(20, 3.0, 4);
    let y = vec![7.3; 40];
    let model = train(&ModelSpec::new(Family::Boosted, Task::Regress, 1), x.view(), &y).unwrap();
    let probe = Array2::from_shape_fn((10, 2), |(i, j)| (i * 3 + j) as f64 - 8.0);
    assert!(model.predict(probe.view()).unwrap().iter().all(|&p| p == 7.3));
    let Params::Boosted(b) = model.params() else {
        unreachable!()
    };
    assert!(b.trees.iter().all(|t| t.depth() == 0));
}

#[test]
fn same_seed_same_predictions() {
    let (x, y) = blobs(40, 1.5, 5);
    let (probe, _) = blobs(30, 1.5, 6);
    for family in Family::ALL {
        for task in [Task::Classify, Task::Regress] {
            let spec = ModelSpec::new(family, task, 11);
            let a = train_normalised(&spec, x.view(), &y).unwrap();
            let b = train_normalised(&spec, x.view(), &y).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.predict(probe.view()).unwrap(), b.predict(probe.view()).unwrap());
        }
    }
}

#[test]
fn deep_forest_overfits() {
    let (x, y) = blobs(100, 1.0, 7);
    let mut spec = ModelSpec::new(Family::Forest, Task::Classify, 2);
    spec.max_depth = None;
    spec.trees = 50;
    let model = train(&spec, x.view(), &y).unwrap();
    assert!(accuracy(&model.predict(x.view()).unwrap(), &y) >= 0.99);
}

#[test]
fn svm_tie_goes_to_positive_class() {
    // Symmetric classes about the origin: the learned bias is ~0 but the
    // origin's margin is exactly the bias; force it to zero to test the rule.
    let x = ndarray::array![[-1.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [2.0, 0.0]];
    let y = [0.0, 1.0, 0.0, 1.0];
    let model = train(&ModelSpec::new(Family::Svm, Task::Classify, 0), x.view(), &y).unwrap();
    let mut json: serde_json::Value = serde_json::to_value(&model).unwrap();
    json["params"]["svm"]["bias"] = 0.0.into();
    let model: kineme::models::TrainedModel = serde_json::from_value(json).unwrap();
    assert_eq!(model.predict(ndarray::array![[0.0, 0.0]].view()).unwrap(), vec![1.0]);
}

#[test]
fn rejects_single_class_and_shape_mismatch() {
    let (x, _) = blobs(5, 3.0, 8);
    for family in Family::ALL {
        let err = train(&ModelSpec::new(family, Task::Classify, 0), x.view(), &[1.0; 10]).unwrap_err();
        assert!(matches!(err, Error::Training(_)), "{err}");
        assert_eq!(err.kind(), ErrorKind::Data);
    }
    let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
    let model = train(&ModelSpec::new(Family::Forest, Task::Classify, 0), x.view(), &y).unwrap();
    assert!(matches!(
        model.predict(Array2::zeros((2, 3)).view()),
        Err(Error::Shape(_))
    ));
    assert!(train(&ModelSpec::new(Family::Svm, Task::Classify, 0), x.view(), &y[..9]).is_err());
    assert!(train(
        &ModelSpec::new(Family::Svm, Task::Regress, 0),
        x.slice(ndarray::s![..1, ..]),
        &[1.0]
    )
    .is_err());
}

#[test]
fn invalid_hyperparameters() {
    let (x, y) = blobs(5, 3.0, 8);
    let mut spec = ModelSpec::new(Family::Boosted, Task::Classify, 0);
    spec.learning_rate = 0.0;
    assert!(matches!(train(&spec, x.view(), &y), Err(Error::Config(_))));
    let mut spec = ModelSpec::new(Family::Svm, Task::Classify, 0);
    spec.lambda = -1.0;
    assert!(matches!(train(&spec, x.view(), &y), Err(Error::Config(_))));
    let mut spec = ModelSpec::new(Family::Forest, Task::Classify, 0);
    spec.trees = 0;
    assert!(matches!(train(&spec, x.view(), &y), Err(Error::Config(_))));
}

#[test]
fn boosted_regression_loss_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Array2::from_shape_fn((120, 4), |_| rng.random_range(-3.0..3.0));
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| 10.0 + 3.0 * r[0] - r[1] * r[2] + rng.random_range(-1.0..1.0))
        .collect();
    let model = train(&ModelSpec::new(Family::Boosted, Task::Regress, 3), x.view(), &y).unwrap();
    let Params::Boosted(b) = model.params() else {
        unreachable!()
    };
    assert_eq!(b.loss_trace.len(), 301);
    for w in b.loss_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(b.loss_trace[300] < 0.5 * b.loss_trace[0]);
}

#[test]
fn svm_objective_near_best_restart() {
    let objective = |task: Task, x: &Array2<f64>, y: &[f64], seed: u64| {
        let spec = ModelSpec::new(Family::Svm, task, seed);
        let m = train(&spec, x.view(), y).unwrap();
        let Params::Svm(s) = m.params() else { unreachable!() };
        s.objective(task, x.view(), y, spec.lambda, spec.epsilon)
    };
    for instance in 0..10 {
        let (x, y) = blobs(15, 1.0, 100 + instance);
        let severity: Vec<f64> = x.rows().into_iter().map(|r| 5.0 + 2.0 * r[0] - r[1]).collect();
        for (task, y) in [(Task::Classify, &y), (Task::Regress, &severity)] {
            let best = (1..=10)
                .map(|s| objective(task, &x, y, s))
                .fold(f64::INFINITY, f64::min);
            let ours = objective(task, &x, y, 0);
            assert!(ours <= 1.05 * best, "instance {instance} {task}: {ours} vs {best}");
        }
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = blobs(20, 2.0, 10);
    for family in Family::ALL {
        let model = train_normalised(&ModelSpec::new(family, Task::Regress, 4), x.view(), &y).unwrap();
        let path = dir.path().join(format!("{family}.model"));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.predict(x.view()).unwrap(), model.predict(x.view()).unwrap());

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Checksum)));
    }
}

fn consistent_data(rows: &[(i8, i8, bool)]) -> (Array2<f64>, Vec<f64>) {
    let mut seen = std::collections::BTreeMap::new();
    for &(a, b, c) in rows {
        seen.entry((a, b)).or_insert(c);
    }
    let x = Array2::from_shape_fn((seen.len(), 2), |(i, j)| {
        let k = seen.keys().nth(i).unwrap();
        f64::from(if j == 0 { k.0 } else { k.1 })
    });
    let y = seen.values().map(|&c| c as u8 as f64).collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_unbagged_tree_memorises(rows in prop::collection::vec((-5i8..5, -5i8..5, any::<bool>()), 2..60)) {
        let (x, y) = consistent_data(&rows);
        prop_assume!(y.contains(&0.0) && y.contains(&1.0));
        let mut spec = ModelSpec::new(Family::Forest, Task::Classify, 1);
        spec.trees = 1;
        spec.bootstrap = false;
        spec.max_depth = None;
        spec.max_features = Some(2);
        let model = train(&spec, x.view(), &y).unwrap();
        prop_assert_eq!(model.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn unbagged_forest_is_rank_based(seed in 0u64..1000, column in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((60, 3), |_| rng.random_range(-2.0f64..2.0));
        let y: Vec<f64> = x.rows().into_iter().map(|r| (r[0] + 0.5 * r[1] > 0.0) as u8 as f64).collect();
        prop_assume!(y.contains(&0.0) && y.contains(&1.0));
        let mut t = x.clone();
        t.column_mut(column).mapv_inplace(|v| v.exp() * 3.0 + v);
        for task in [Task::Classify, Task::Regress] {
            let mut spec = ModelSpec::new(Family::Forest, task, seed);
            spec.trees = 15;
            spec.bootstrap = false;
            let a = train(&spec, x.view(), &y).unwrap().predict(x.view()).unwrap();
            let b = train(&spec, t.view(), &y).unwrap().predict(t.view()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
