use kineme::ingest::BinaryLabel;
use kineme::synth::{generate_corpus, generate_videos, write_corpus, ClassMotion, GeneratorSpec};

fn path_length(s: &kineme::ingest::AngleSeries) -> f64 {
    let x = s.samples();
    (1..x.nrows())
        .map(|t| (0..3).map(|a| (x[[t, a]] - x[[t - 1, a]]).abs()).sum::<f64>())
        .sum()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn wider_motion_travels_further() {
    let quiet = |amplitude| ClassMotion {
        amplitude,
        noise_std: 0.0,
        ..ClassMotion::default()
    };
    let spec = GeneratorSpec {
        low: quiet(10.0),
        high: quiet(2.0),
        seed: 4,
        ..GeneratorSpec::default()
    };
    let videos = generate_videos(&spec).unwrap();
    let mean = |label| {
        let v: Vec<f64> = videos
            .iter()
            .filter(|v| v.record.binary_label == label)
            .map(|v| path_length(&v.series))
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let ratio = mean(BinaryLabel::Low) / mean(BinaryLabel::High);
    assert!(ratio >= 3.0, "ratio {ratio}");
}

#[test]
fn severity_tracks_motion_deficit() {
    let spec = GeneratorSpec {
        seed: 8,
        ..GeneratorSpec::default()
    };
    let videos = generate_videos(&spec).unwrap();
    let deficit: Vec<f64> = videos.iter().map(|v| -v.amplitude).collect();
    let severity: Vec<f64> = videos.iter().map(|v| f64::from(v.record.raw_score)).collect();
    let rho = pearson(&ranks(&deficit), &ranks(&severity));
    assert!(rho > 0.9, "spearman {rho}");
}

#[test]
fn written_corpus_is_byte_identical() {
    let spec = GeneratorSpec {
        videos_per_class: 3,
        seed: 12,
        ..GeneratorSpec::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let (series, manifest) = generate_corpus(&spec).unwrap();
        write_corpus(d.path(), &series, &manifest).unwrap();
    }
    let read = |d: &tempfile::TempDir, rel: &str| std::fs::read(d.path().join(rel)).unwrap();
    assert_eq!(read(&dirs[0], "manifest.csv"), read(&dirs[1], "manifest.csv"));
    for v in generate_videos(&spec).unwrap() {
        let rel = v.record.series_path.to_str().unwrap().to_string();
        assert_eq!(read(&dirs[0], &rel), read(&dirs[1], &rel));
    }
}

#[test]
fn spec_round_trips_through_json() {
    let spec = GeneratorSpec {
        name: "b".into(),
        amplitude_shift: 0.5,
        ..GeneratorSpec::default()
    };
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<GeneratorSpec>(&text).unwrap(), spec);
    let partial: GeneratorSpec = serde_json::from_str(r#"{"seed": 3, "low": {"amplitude": 8.0}}"#).unwrap();
    assert_eq!(partial.seed, 3);
    assert_eq!(partial.low.noise_std, 1.0);
    assert!(serde_json::from_str::<GeneratorSpec>(r#"{"sed": 3}"#).is_err());
}
