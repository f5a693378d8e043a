use kineme::eval::{
    fit_on_videos, kfold_on_features, learn_codebook, regression_metrics, run_kfold, run_transfer, stratified_folds,
    transfer_on_features, EvalConfig, Protocol, VideoFeatures,
};
use kineme::ingest::{BinaryLabel, Corpus};
use kineme::models::{Family, Hyperparameters, ModelSpec, Task};
use kineme::synth::{generate_corpus, GeneratorSpec};
use kineme::ErrorKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fake_videos(n_per_class: usize, seed: u64, corpus: &str) -> Vec<VideoFeatures> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2 * n_per_class)
        .map(|i| {
            let high = i >= n_per_class;
            let centre = if high { 2.0 } else { -2.0 };
            VideoFeatures {
                video_id: format!("{corpus}-{i}"),
                corpus: corpus.into(),
                label: if high { BinaryLabel::High } else { BinaryLabel::Low },
                severity: if high { 20.0 } else { 4.0 } + rng.random_range(-2.0..2.0),
                chunks: (0..5)
                    .map(|_| std::array::from_fn(|_| centre + rng.random_range(-1.0..1.0)))
                    .collect(),
            }
        })
        .collect()
}

fn quick_models() -> Hyperparameters {
    Hyperparameters {
        forest_trees: 20,
        boosted_stages: 30,
        svm_epochs: 10,
        ..Hyperparameters::default()
    }
}

fn dummy_codebook() -> kineme::codebook::Codebook {
    let spec = GeneratorSpec {
        name: "cb".into(),
        videos_per_class: 2,
        ..GeneratorSpec::default()
    };
    let (s, m) = generate_corpus(&spec).unwrap();
    let corpus = Corpus::new("cb", m, s).unwrap();
    let mut cfg = EvalConfig {
        datasets: vec!["cb".into()],
        codebook_source: "cb".into(),
        ..EvalConfig::default()
    };
    cfg.discovery.nmf.rank = 4;
    cfg.discovery.gmm.components = 4;
    learn_codebook(&cfg, &[corpus]).unwrap()
}

#[test]
fn training_ignores_held_out_videos() {
    let mut videos = fake_videos(6, 1, "x");
    let train: Vec<usize> = (0..12).filter(|i| i % 3 != 0).collect();
    for family in Family::ALL {
        let spec = ModelSpec::new(family, Task::Classify, 4);
        let before = fit_on_videos(&spec, &videos, &train).unwrap().to_bytes().unwrap();
        for v in videos.iter_mut().step_by(3) {
            for c in &mut v.chunks {
                c.iter_mut().for_each(|x| *x = 1e6);
            }
        }
        let after = fit_on_videos(&spec, &videos, &train).unwrap().to_bytes().unwrap();
        assert_eq!(before, after, "{family}");
    }
}

#[test]
fn kfold_separates_clean_features_and_scores_every_video() {
    let videos = fake_videos(10, 2, "x");
    let cfg = EvalConfig {
        datasets: vec!["x".into()],
        codebook_source: "cb".into(),
        repetitions: 2,
        folds: 5,
        models: quick_models(),
        ..EvalConfig::default()
    };
    let report = kfold_on_features(&cfg, &dummy_codebook(), &videos).unwrap();
    let best = report.cell("best", Task::Classify).unwrap();
    assert_eq!(best.runs(), 10);
    assert!(best.f1.unwrap().mean > 0.95);
    for family in Family::ALL {
        for task in [Task::Classify, Task::Regress] {
            let n = report
                .predictions
                .iter()
                .filter(|p| p.model == family && p.task == task)
                .count();
            assert_eq!(n, 2 * videos.len(), "each video predicted once per repetition");
        }
    }
    let mae = report.cell("best", Task::Regress).unwrap().mae.unwrap().mean;
    let rmse = report.cell("best", Task::Regress).unwrap().rmse.unwrap().mean;
    assert!(mae <= rmse);
}

#[test]
fn transfer_rejects_shared_videos() {
    let cb = dummy_codebook();
    let train = fake_videos(4, 3, "a");
    let mut test = fake_videos(4, 4, "b");
    test[0].video_id = train[2].video_id.clone();
    let cfg = EvalConfig {
        protocol: Protocol::Transfer,
        datasets: vec!["a".into()],
        test_datasets: vec!["b".into()],
        codebook_source: "a".into(),
        ..EvalConfig::default()
    };
    let err = transfer_on_features(&cfg, &cb, &train, &test).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Protocol);
}

#[test]
fn transfer_rejects_corpus_on_both_sides() {
    let cfg = EvalConfig {
        protocol: Protocol::Transfer,
        datasets: vec!["a".into()],
        test_datasets: vec!["a".into()],
        codebook_source: "a".into(),
        ..EvalConfig::default()
    };
    let err = run_transfer(&cfg, &[]).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Protocol);
}

#[test]
fn kfold_pipeline_end_to_end() {
    let spec = GeneratorSpec {
        name: "s".into(),
        videos_per_class: 5,
        seed: 9,
        ..GeneratorSpec::default()
    };
    let (series, manifest) = generate_corpus(&spec).unwrap();
    let corpus = Corpus::new("s", manifest, series).unwrap();
    let mut cfg = EvalConfig {
        datasets: vec!["s".into()],
        codebook_source: "s".into(),
        repetitions: 1,
        folds: 5,
        families: vec![Family::Forest],
        models: quick_models(),
        ..EvalConfig::default()
    };
    cfg.discovery.nmf.rank = 8;
    cfg.discovery.gmm.components = 8;
    let a = run_kfold(&cfg, std::slice::from_ref(&corpus)).unwrap();
    let b = run_kfold(&cfg, std::slice::from_ref(&corpus)).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert_eq!(a.codebook_videos, 5);
    assert!(a.to_text().contains("s-conf"));
    let dir = tempfile::tempdir().unwrap();
    a.write_dir(dir.path()).unwrap();
    for f in ["report.txt", "report.csv", "predictions.csv", "report.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("protocol,codebook,train,test,chunk_seconds,model,task,"));

    let unknown = EvalConfig {
        codebook_source: "missing".into(),
        ..cfg
    };
    assert_eq!(run_kfold(&unknown, &[corpus]).unwrap_err().kind(), ErrorKind::Config);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn folds_are_stratified(labels in prop::collection::vec(any::<bool>(), 10..80), k in 2usize..10, seed: u64) {
        let labels: Vec<BinaryLabel> = labels
            .into_iter()
            .map(|h| if h { BinaryLabel::High } else { BinaryLabel::Low })
            .collect();
        let folds = stratified_folds(&labels, k, seed).unwrap();
        let n = labels.len() as f64;
        for f in 0..k {
            let size = folds.iter().filter(|&&x| x == f).count() as f64;
            prop_assert!((size - n / k as f64).abs() < 1.0 + 1e-9);
            for class in [BinaryLabel::Low, BinaryLabel::High] {
                let total = labels.iter().filter(|&&l| l == class).count() as f64;
                let here = folds.iter().zip(&labels).filter(|&(&x, &l)| x == f && l == class).count() as f64;
                prop_assert!((here - total / k as f64).abs() < 1.0 + 1e-9);
            }
        }
        prop_assert_eq!(folds, stratified_folds(&labels, k, seed).unwrap());
    }

    #[test]
    fn mae_never_exceeds_rmse(errs in prop::collection::vec(-50.0f64..50.0, 1..60)) {
        let truth = vec![0.0; errs.len()];
        let m = regression_metrics(&truth, &errs).unwrap();
        prop_assert!(m.mae <= m.rmse + 1e-12);
    }
}
