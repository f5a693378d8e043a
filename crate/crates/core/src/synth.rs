//! Labelled synthetic head-pose corpora.
//!
//! Each video is a 180 degree baseline plus a few slow sinusoidal nods,
//! turns and tilts whose amplitude depends on the class, interrupted by
//! pauses (frozen pose), with optional drift and Gaussian sample noise.
//! Severity falls linearly with amplitude; the binary label is a threshold
//! on severity.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    wrap_degrees, write_pose_csv, AngleSeries, BinaryLabel, CorpusManifest, IngestConfig, ManifestRecord, Scale,
    CANONICAL_LEN, CANONICAL_RATE_HZ,
};
use crate::rng::rng_for;

/// Motion parameters of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassMotion {
    /// Typical summed sinusoid amplitude per angle, degrees.
    pub amplitude: f64,
    /// Slow linear drift, degrees per second.
    pub drift_rate: f64,
    /// Chance per second of starting a pause.
    pub pause_probability: f64,
    pub noise_std: f64,
}

impl Default for ClassMotion {
    fn default() -> Self {
        ClassMotion {
            amplitude: 10.0,
            drift_rate: 0.0,
            pause_probability: 0.02,
            noise_std: 1.0,
        }
    }
}

/// Linear map from amplitude to a QIDS-SR-like score, clamped to [0, 27].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityLink {
    /// Amplitude scoring 0.
    pub amplitude_at_zero: f64,
    /// Amplitude scoring 27.
    pub amplitude_at_max: f64,
    /// Integer noise drawn uniformly from `-noise..=noise`.
    pub noise: u32,
    /// Videos scoring above this are labelled high.
    pub high_above: u32,
}

impl Default for SeverityLink {
    fn default() -> Self {
        SeverityLink {
            amplitude_at_zero: 12.0,
            amplitude_at_max: 1.0,
            noise: 1,
            high_above: 10,
        }
    }
}

impl SeverityLink {
    /// Noise-free score before rounding and clamping.
    pub fn score(&self, amplitude: f64) -> f64 {
        27.0 * (self.amplitude_at_zero - amplitude) / (self.amplitude_at_zero - self.amplitude_at_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Corpus name; also the video id prefix.
    pub name: String,
    pub videos_per_class: usize,
    pub low: ClassMotion,
    pub high: ClassMotion,
    /// Per-video amplitude varies by up to this fraction either way.
    pub amplitude_jitter: f64,
    pub sinusoids: usize,
    pub min_frequency_hz: f64,
    pub max_frequency_hz: f64,
    pub severity: SeverityLink,
    /// Scales the observed motion after severities are drawn; 1 leaves it alone.
    pub amplitude_shift: f64,
    /// Reject specs whose two classes are identical.
    pub require_separation: bool,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            name: "synthetic".into(),
            videos_per_class: 20,
            low: ClassMotion::default(),
            high: ClassMotion {
                amplitude: 2.0,
                pause_probability: 0.06,
                ..ClassMotion::default()
            },
            amplitude_jitter: 0.15,
            sinusoids: 3,
            min_frequency_hz: 0.05,
            max_frequency_hz: 0.4,
            severity: SeverityLink::default(),
            amplitude_shift: 1.0,
            require_separation: true,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (class, m) in [("low", &self.low), ("high", &self.high)] {
            if !(m.amplitude >= 0.0 && m.amplitude.is_finite()) {
                return bad(format!("{class} amplitude must be non-negative, got {}", m.amplitude));
            }
            if !(0.0..=1.0).contains(&m.pause_probability) {
                return bad(format!(
                    "{class} pause probability must be in [0, 1], got {}",
                    m.pause_probability
                ));
            }
            if !(m.noise_std >= 0.0 && m.noise_std.is_finite()) {
                return bad(format!("{class} noise std must be non-negative, got {}", m.noise_std));
            }
            if !m.drift_rate.is_finite() {
                return bad(format!("{class} drift rate must be finite"));
            }
        }
        if self.videos_per_class == 0 {
            return bad("videos_per_class must be at least 1".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\', ',']) {
            return bad(format!(
                "corpus name '{}' must be non-empty without '/', '\\' or ','",
                self.name
            ));
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return bad(format!(
                "amplitude_jitter must be in [0, 1), got {}",
                self.amplitude_jitter
            ));
        }
        if self.sinusoids == 0 {
            return bad("sinusoids must be at least 1".into());
        }
        if !(self.min_frequency_hz > 0.0 && self.min_frequency_hz <= self.max_frequency_hz) {
            return bad("frequency range must satisfy 0 < min <= max".into());
        }
        if self.max_frequency_hz >= CANONICAL_RATE_HZ / 2.0 {
            return bad(format!("max frequency must be below {} Hz", CANONICAL_RATE_HZ / 2.0));
        }
        let s = &self.severity;
        if s.amplitude_at_zero <= s.amplitude_at_max || s.amplitude_at_zero.is_nan() || s.amplitude_at_max.is_nan() {
            return bad("severity link must decrease with amplitude (amplitude_at_zero > amplitude_at_max)".into());
        }
        if s.high_above >= 27 {
            return bad("severity high_above must be below 27".into());
        }
        if !(self.amplitude_shift > 0.0 && self.amplitude_shift.is_finite()) {
            return bad(format!(
                "amplitude_shift must be positive, got {}",
                self.amplitude_shift
            ));
        }
        if self.require_separation && self.low == self.high {
            return bad("low and high classes have identical motion parameters".into());
        }
        Ok(())
    }
}

/// A generated video and the amplitude that produced its severity.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub series: AngleSeries,
    pub record: ManifestRecord,
    pub amplitude: f64,
}

/// Relative amplitude of pitch, yaw and roll motion.
const ANGLE_WEIGHTS: [f64; 3] = [1.0, 1.0, 0.5];
const PAUSE_SECONDS: (f64, f64) = (2.0, 6.0);

fn generate_one(spec: &GeneratorSpec, class: usize, index: usize) -> Result<SyntheticVideo> {
    let motion = if class == 0 { &spec.low } else { &spec.high };
    let mut rng = rng_for(spec.seed, &[class as u64, index as u64]);
    let jitter = if spec.amplitude_jitter > 0.0 {
        rng.random_range(-spec.amplitude_jitter..=spec.amplitude_jitter)
    } else {
        0.0
    };
    let amplitude = motion.amplitude * (1.0 + jitter);

    let link = &spec.severity;
    let noise = if link.noise > 0 {
        rng.random_range(-(link.noise as i64)..=link.noise as i64)
    } else {
        0
    };
    let severity = (link.score(amplitude).round() as i64 + noise).clamp(0, 27) as u32;
    let label = if severity > link.high_above {
        BinaryLabel::High
    } else {
        BinaryLabel::Low
    };

    let observed = amplitude * spec.amplitude_shift;
    let mut waves = Vec::new();
    for (a, w) in ANGLE_WEIGHTS.iter().enumerate() {
        let shares: Vec<f64> = (0..spec.sinusoids).map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = shares.iter().sum();
        for share in shares {
            let f = rng.random_range(spec.min_frequency_hz..=spec.max_frequency_hz);
            let phase = rng.random_range(0.0..2.0 * PI);
            waves.push((a, observed * w * share / total, f, phase));
        }
    }
    let drift_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let sample_noise = Normal::new(0.0, motion.noise_std).map_err(|e| Error::Config(e.to_string()))?;

    let dt = 1.0 / CANONICAL_RATE_HZ;
    let per_second = CANONICAL_RATE_HZ as usize;
    let mut samples = Array2::zeros((CANONICAL_LEN, 3));
    let mut clock = 0.0;
    let mut paused_until = 0usize;
    for t in 0..CANONICAL_LEN {
        if t % per_second == 0 && t >= paused_until && rng.random_bool(motion.pause_probability) {
            let secs = rng.random_range(PAUSE_SECONDS.0..=PAUSE_SECONDS.1);
            paused_until = t + (secs * CANONICAL_RATE_HZ).round() as usize;
        }
        if t >= paused_until && t > 0 {
            clock += dt;
        }
        let drift = drift_sign * motion.drift_rate * t as f64 * dt;
        for a in 0..3 {
            samples[[t, a]] = 180.0 + drift;
        }
        for &(a, amp, f, phase) in &waves {
            samples[[t, a]] += amp * (2.0 * PI * f * clock + phase).sin();
        }
        for a in 0..3 {
            let n = if motion.noise_std > 0.0 {
                sample_noise.sample(&mut rng)
            } else {
                0.0
            };
            samples[[t, a]] = wrap_degrees(samples[[t, a]] + n);
        }
    }

    let class_name = if class == 0 { "low" } else { "high" };
    let video_id = format!("{}-{class_name}-{index:03}", spec.name);
    Ok(SyntheticVideo {
        series: AngleSeries::new(video_id.clone(), samples, CANONICAL_RATE_HZ)?,
        record: ManifestRecord {
            series_path: PathBuf::from("series").join(format!("{video_id}.csv")),
            video_id,
            scale: Scale::QidsSr,
            raw_score: severity,
            binary_label: label,
        },
        amplitude,
    })
}

/// All videos of the spec, low class first.
pub fn generate_videos(spec: &GeneratorSpec) -> Result<Vec<SyntheticVideo>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..2)
        .flat_map(|c| (0..spec.videos_per_class).map(move |i| (c, i)))
        .collect();
    jobs.par_iter().map(|&(c, i)| generate_one(spec, c, i)).collect()
}

pub fn generate_corpus(spec: &GeneratorSpec) -> Result<(Vec<AngleSeries>, CorpusManifest)> {
    let videos = generate_videos(spec)?;
    let mut manifest = CorpusManifest::default();
    let mut series = Vec::with_capacity(videos.len());
    for v in videos {
        manifest.records.push(v.record);
        series.push(v.series);
    }
    Ok((series, manifest))
}

/// Writes `manifest.csv` and one pose CSV per video under `dir`; returns the
/// manifest path.
pub fn write_corpus(dir: &Path, series: &[AngleSeries], manifest: &CorpusManifest) -> Result<PathBuf> {
    let cfg = IngestConfig::default();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (record, s) in manifest.records.iter().zip(series) {
        let path = dir.join(&record.series_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_pose_csv(s, std::io::BufWriter::new(file), &cfg)?;
    }
    let path = dir.join("manifest.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    manifest.write(std::io::BufWriter::new(file))?;
    Ok(path)
}
