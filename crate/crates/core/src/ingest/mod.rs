//! Head-pose ingestion: pose-tracker CSV parsing, canonical resampling, angle
//! wrapping, segmentation into overlapping windows, and corpus manifests.
//!
//! Every series that reaches kineme discovery or feature extraction is
//! *canonical*: [`CANONICAL_LEN`] samples covering the first
//! [`CANONICAL_SECONDS`] of the recording, in degrees within `[0, 360)`.
//! Recordings shorter than that are resampled at a proportionally higher rate
//! so the sample count stays fixed.

mod manifest;
mod segment;

pub use manifest::{load_manifest, BinaryLabel, CorpusManifest, ManifestRecord, Scale};
pub use segment::{chunk_boundaries, segment_series, Segment, SegmentMatrix, Segmentation, SUPPORTED_CHUNK_SECONDS};

use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal sampling rate of a canonical series.
pub const CANONICAL_RATE_HZ: f64 = 10.0;
/// Duration of recording a canonical series covers.
pub const CANONICAL_SECONDS: f64 = 300.0;
/// Number of samples in a canonical series.
pub const CANONICAL_LEN: usize = 3000;
/// Offset added to every angle (in degrees) before wrapping into `[0, 360)`.
pub const DEFAULT_OFFSET_DEGREES: f64 = 180.0;

/// The three head rotation angles, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angle {
    Pitch,
    Yaw,
    Roll,
}

impl Angle {
    pub const ALL: [Angle; 3] = [Angle::Pitch, Angle::Yaw, Angle::Roll];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Angle::Pitch => "pitch",
            Angle::Yaw => "yaw",
            Angle::Roll => "roll",
        }
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360.0
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// A uniformly sampled pitch/yaw/roll trajectory for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    video_id: String,
    samples: Array2<f64>,
    sample_rate_hz: f64,
    warnings: Vec<String>,
}

impl AngleSeries {
    /// Builds a series from a `T x 3` matrix of degrees (columns pitch, yaw, roll).
    pub fn new(video_id: impl Into<String>, samples: Array2<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.ncols() != 3 {
            return Err(Error::Contract(format!(
                "angle series needs 3 columns, got {}",
                samples.ncols()
            )));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Contract(format!("invalid sample rate {sample_rate_hz}")));
        }
        if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0 && **v < 360.0)) {
            return Err(Error::Contract(format!("angle value {bad} outside [0, 360) degrees")));
        }
        Ok(AngleSeries {
            video_id: video_id.into(),
            samples,
            sample_rate_hz,
            warnings: Vec::new(),
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    /// `T x 3` samples in degrees.
    pub fn samples(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    pub fn angle(&self, angle: Angle) -> ArrayView1<'_, f64> {
        self.samples.column(angle.index())
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    /// Effective sampling rate; above 10 Hz for recordings shorter than five minutes.
    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn is_canonical(&self) -> bool {
        self.len() == CANONICAL_LEN
    }

    /// Data-quality warnings attached at parse time.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, warning: String) {
        self.warnings.push(warning);
    }

    pub fn with_video_id(mut self, video_id: impl Into<String>) -> Self {
        self.video_id = video_id.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Radians,
    Degrees,
}

/// Column mapping and preprocessing constants for pose CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub frame_column: String,
    pub timestamp_column: String,
    pub pitch_column: String,
    pub yaw_column: String,
    pub roll_column: String,
    /// Optional tracker-success column; rows with value 0 are dropped.
    pub success_column: String,
    pub unit: AngleUnit,
    pub offset_degrees: f64,
    pub min_valid_seconds: f64,
    /// Fraction of dropped rows above which a quality warning is attached.
    pub max_dropped_fraction: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            frame_column: "frame".into(),
            timestamp_column: "timestamp".into(),
            pitch_column: "pose_Rx".into(),
            yaw_column: "pose_Ry".into(),
            roll_column: "pose_Rz".into(),
            success_column: "success".into(),
            unit: AngleUnit::Radians,
            offset_degrees: DEFAULT_OFFSET_DEGREES,
            min_valid_seconds: 10.0,
            max_dropped_fraction: 0.2,
        }
    }
}

/// Parses a pose-tracker CSV into a canonical [`AngleSeries`].
///
/// The video id is the file stem.
pub fn parse_pose_csv(path: impl AsRef<Path>, config: &IngestConfig) -> Result<AngleSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let video_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_pose_reader(file, path, video_id, config)
}

struct Row {
    t: f64,
    angles: [f64; 3],
}

/// Like [`parse_pose_csv`] over any reader; `origin` is only used in error messages.
pub fn parse_pose_reader<R: Read>(
    reader: R,
    origin: &Path,
    video_id: impl Into<String>,
    config: &IngestConfig,
) -> Result<AngleSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let column = |name: &str| find(name).ok_or_else(|| Error::format(origin, format!("missing column '{name}'")));

    column(&config.frame_column)?;
    let t_col = column(&config.timestamp_column)?;
    let angle_cols = [
        column(&config.pitch_column)?,
        column(&config.yaw_column)?,
        column(&config.roll_column)?,
    ];
    let success_col = find(&config.success_column);
    let to_degrees = match config.unit {
        AngleUnit::Radians => f64::to_degrees,
        AngleUnit::Degrees => |x: f64| x,
    };

    let mut total = 0usize;
    let mut timestamps = Vec::new();
    let mut valid = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::format(origin, e.to_string()))?;
        let field = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| Error::format(origin, format!("line {line}: cannot parse '{raw}' as a number")))
        };
        total += 1;
        let t = field(t_col)?;
        if !t.is_finite() {
            return Err(Error::format(origin, format!("line {line}: non-finite timestamp")));
        }
        timestamps.push(t);
        let ok = match success_col {
            Some(c) => field(c)? != 0.0,
            None => true,
        };
        let mut angles = [0.0; 3];
        for (a, &c) in angles.iter_mut().zip(&angle_cols) {
            *a = field(c)?;
        }
        if ok && angles.iter().all(|a| a.is_finite()) {
            valid.push(Row {
                t,
                angles: angles.map(|a| to_degrees(a) + config.offset_degrees),
            });
        }
    }

    if total < 2 {
        return Err(Error::InsufficientData {
            path: origin.to_path_buf(),
            message: format!("{total} rows"),
        });
    }
    let frame_interval =
        median_positive_step(&timestamps).ok_or_else(|| Error::format(origin, "timestamps never increase"))?;
    let valid_seconds = valid.len() as f64 * frame_interval;
    if valid.len() < 2 || valid_seconds < config.min_valid_seconds {
        return Err(Error::InsufficientData {
            path: origin.to_path_buf(),
            message: format!(
                "{valid_seconds:.2} s of valid samples, need at least {}",
                config.min_valid_seconds
            ),
        });
    }
    valid.sort_by(|a, b| a.t.total_cmp(&b.t));

    let t0 = timestamps.iter().copied().fold(f64::INFINITY, f64::min);
    let t_end = timestamps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let duration = (t_end - t0) + frame_interval;
    let rate = if duration >= CANONICAL_SECONDS {
        CANONICAL_RATE_HZ
    } else {
        CANONICAL_LEN as f64 / duration
    };

    let mut samples = Array2::zeros((CANONICAL_LEN, 3));
    let mut cursor = 0usize;
    for i in 0..CANONICAL_LEN {
        let t = t0 + i as f64 / rate;
        while cursor + 1 < valid.len() && valid[cursor + 1].t <= t {
            cursor += 1;
        }
        let value = |a: usize| -> f64 {
            let lo = &valid[cursor];
            if t <= lo.t || cursor + 1 == valid.len() {
                return lo.angles[a];
            }
            let hi = &valid[cursor + 1];
            let w = (t - lo.t) / (hi.t - lo.t);
            lo.angles[a] + w * (hi.angles[a] - lo.angles[a])
        };
        for a in 0..3 {
            samples[[i, a]] = wrap_degrees(value(a));
        }
    }

    let mut series = AngleSeries::new(video_id, samples, rate)?;
    let dropped = total - valid.len();
    let dropped_fraction = dropped as f64 / total as f64;
    if dropped_fraction > config.max_dropped_fraction {
        series.push_warning(format!(
            "{:.1}% of rows dropped as tracker failures",
            100.0 * dropped_fraction
        ));
    }
    Ok(series)
}

/// A named collection of canonical series with their manifest.
///
/// `series[i]` belongs to `manifest.records[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub manifest: CorpusManifest,
    pub series: Vec<AngleSeries>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, manifest: CorpusManifest, series: Vec<AngleSeries>) -> Result<Self> {
        if manifest.len() != series.len() {
            return Err(Error::Contract(format!(
                "manifest has {} records but {} series were supplied",
                manifest.len(),
                series.len()
            )));
        }
        for (r, s) in manifest.records.iter().zip(&series) {
            if r.video_id != s.video_id() {
                return Err(Error::Contract(format!(
                    "series '{}' does not match manifest record '{}'",
                    s.video_id(),
                    r.video_id
                )));
            }
        }
        Ok(Corpus {
            name: name.into(),
            manifest,
            series,
        })
    }

    /// Loads a manifest and parses every series it lists (in parallel).
    pub fn load(name: impl Into<String>, manifest_path: impl AsRef<Path>, config: &IngestConfig) -> Result<Self> {
        let manifest = load_manifest(manifest_path)?;
        let series = manifest
            .records
            .par_iter()
            .map(|r| Ok(parse_pose_csv(manifest.resolve(r), config)?.with_video_id(r.video_id.clone())))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(name, manifest, series)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ManifestRecord, &AngleSeries)> {
        self.manifest.records.iter().zip(&self.series)
    }
}

fn median_positive_step(timestamps: &[f64]) -> Option<f64> {
    let mut steps: Vec<f64> = timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_by(f64::total_cmp);
    Some(steps[steps.len() / 2])
}

/// Writes a series in pose-CSV layout so that [`parse_pose_csv`] with the same
/// `config` reads it back.
pub fn write_pose_csv<W: std::io::Write>(series: &AngleSeries, writer: W, config: &IngestConfig) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::format("<pose csv output>", e.to_string());
    wtr.write_record([
        config.frame_column.as_str(),
        config.timestamp_column.as_str(),
        config.success_column.as_str(),
        config.pitch_column.as_str(),
        config.yaw_column.as_str(),
        config.roll_column.as_str(),
    ])
    .map_err(csv_err)?;
    let from_degrees = |d: f64| {
        let centred = d - config.offset_degrees;
        match config.unit {
            AngleUnit::Radians => centred.to_radians(),
            AngleUnit::Degrees => centred,
        }
    };
    for (i, row) in series.samples().rows().into_iter().enumerate() {
        let t = i as f64 / series.sample_rate_hz();
        wtr.write_record([
            i.to_string(),
            t.to_string(),
            "1".to_string(),
            from_degrees(row[0]).to_string(),
            from_degrees(row[1]).to_string(),
            from_degrees(row[2]).to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<pose csv output>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn csv_from_rows(rows: &[(f64, f64, f64, f64)], fps: f64) -> String {
        let mut out = String::from("frame, timestamp, success, pose_Rx, pose_Ry, pose_Rz\n");
        for (i, (_, p, y, r)) in rows.iter().enumerate() {
            out.push_str(&format!("{}, {}, 1, {p}, {y}, {r}\n", i + 1, i as f64 / fps));
        }
        out
    }

    fn parse(text: &str, config: &IngestConfig) -> Result<AngleSeries> {
        parse_pose_reader(Cursor::new(text.as_bytes()), Path::new("test.csv"), "v", config)
    }

    #[test]
    fn zero_pose_maps_to_offset() {
        let rows = vec![(0.0, 0.0, 0.0, 0.0); 3100];
        let s = parse(&csv_from_rows(&rows, 10.0), &IngestConfig::default()).unwrap();
        assert_eq!(s.len(), CANONICAL_LEN);
        assert!(s.samples().iter().all(|&v| v == 180.0));
        assert_eq!(s.sample_rate_hz(), 10.0);
    }

    #[test]
    fn negative_pitch_offset_and_wrap() {
        let rows = vec![(0.0, -std::f64::consts::FRAC_PI_6, 0.0, 0.0); 3000];
        let s = parse(&csv_from_rows(&rows, 10.0), &IngestConfig::default()).unwrap();
        assert_abs_diff_eq!(s.angle(Angle::Pitch)[0], 150.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.angle(Angle::Yaw)[0], 180.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_degrees(360.0), 0.0);
        assert_eq!(wrap_degrees(-30.0), 330.0);
        assert_eq!(wrap_degrees(725.5), 5.5);
        assert_eq!(wrap_degrees(-1e-20), 0.0);
    }

    #[test]
    fn short_recording_is_upsampled() {
        // 150 s at 30 fps with a pitch ramp, so every output sample can be
        // checked against the ramp evaluated at its own timestamp.
        let fps = 30.0;
        let n = 4500;
        let mut text = String::from("frame,timestamp,pose_Rx,pose_Ry,pose_Rz\n");
        for i in 0..n {
            let t = i as f64 / fps;
            text.push_str(&format!("{i},{t},{},0,0\n", 0.1 * t));
        }
        let config = IngestConfig {
            unit: AngleUnit::Degrees,
            ..IngestConfig::default()
        };
        let s = parse(&text, &config).unwrap();
        assert_eq!(s.len(), 3000);
        assert_abs_diff_eq!(s.sample_rate_hz(), 20.0, epsilon = 1e-9);
        for (i, v) in s.angle(Angle::Pitch).iter().enumerate() {
            let t = i as f64 / 20.0;
            assert_abs_diff_eq!(*v, 180.0 + 0.1 * t, epsilon = 1e-6);
        }
    }

    #[test]
    fn missing_column_is_format_error() {
        let text = "frame,timestamp,pose_Rx,pose_Ry\n0,0,0,0\n";
        let err = parse(text, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
        assert!(err.to_string().contains("pose_Rz"));
    }

    #[test]
    fn too_short_is_insufficient() {
        let rows = vec![(0.0, 0.0, 0.0, 0.0); 50];
        let err = parse(&csv_from_rows(&rows, 10.0), &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { .. }));
    }

    #[test]
    fn tracker_failures_are_interpolated_and_flagged() {
        let mut text = String::from("frame,timestamp,success,pose_Rx,pose_Ry,pose_Rz\n");
        for i in 0..3000 {
            let t = i as f64 / 10.0;
            // every 4th row fails and carries junk
            let (ok, p) = if i % 4 == 1 { (0, 99.0) } else { (1, 0.01 * t) };
            text.push_str(&format!("{i},{t},{ok},{p},0,0\n"));
        }
        let config = IngestConfig {
            unit: AngleUnit::Degrees,
            ..IngestConfig::default()
        };
        let s = parse(&text, &config).unwrap();
        assert!(s.warnings().iter().any(|w| w.contains("dropped")));
        for (i, v) in s.angle(Angle::Pitch).iter().enumerate().take(2990) {
            assert_abs_diff_eq!(*v, 180.0 + 0.001 * i as f64, epsilon = 1e-9);
        }
    }

    #[test]
    fn few_failures_no_warning() {
        let mut text = String::from("frame,timestamp,success,pose_Rx,pose_Ry,pose_Rz\n");
        for i in 0..3000 {
            let ok = if i % 10 == 3 { 0 } else { 1 };
            text.push_str(&format!("{i},{},{ok},0,0,0\n", i as f64 / 10.0));
        }
        let s = parse(&text, &IngestConfig::default()).unwrap();
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn write_then_parse_round_trips() {
        let mut samples = Array2::zeros((3000, 3));
        for i in 0..3000 {
            samples[[i, 0]] = 180.0 + 10.0 * (i as f64 / 40.0).sin();
            samples[[i, 1]] = 175.0;
            samples[[i, 2]] = 181.5;
        }
        let series = AngleSeries::new("rt", samples, 10.0).unwrap();
        let mut buf = Vec::new();
        write_pose_csv(&series, &mut buf, &IngestConfig::default()).unwrap();
        let back = parse_pose_reader(&buf[..], Path::new("rt.csv"), "rt", &IngestConfig::default()).unwrap();
        for (a, b) in series.samples().iter().zip(back.samples().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(x in -1e6f64..1e6) {
            let w = wrap_degrees(x);
            prop_assert!((0.0..360.0).contains(&w));
            prop_assert_eq!(wrap_degrees(w), w);
        }
    }
}
