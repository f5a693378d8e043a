//! Kineme discovery, encoding and persistence.
//!
//! A codebook is learned from the low / healthy cohort only: their segments
//! are pooled into `H`, factorised as `H ~ B C`, the columns of `C` are
//! clustered with a GMM, and the cluster means `C*` are mapped back to pose
//! space as `H* = B C*`. Each column of `H*` is one kineme, a 5 s
//! pitch/yaw/roll trajectory.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, GmmConfig, GmmModel, KinemeLabel};
use crate::ingest::{AngleSeries, BinaryLabel, CorpusManifest, SegmentMatrix, Segmentation, DEFAULT_OFFSET_DEGREES};
use crate::nmf::{fit_nmf, NmfConfig, NmfModel, Projector};
use crate::rng::derive_seed;

const KIND: [u8; 4] = *b"CDBK";

/// Everything that must agree between a codebook and the data it encodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub segment_len: usize,
    pub hop: usize,
    pub series_len: usize,
    /// Nominal rate; shorter recordings are upsampled onto the same sample count.
    pub sample_rate_hz: f64,
    pub offset_degrees: f64,
    pub nmf_rank: usize,
    pub kinemes: usize,
    pub nmf_seed: u64,
    pub gmm_seed: u64,
}

impl Fingerprint {
    pub fn segmentation(&self) -> Segmentation {
        Segmentation {
            segment_len: self.segment_len,
            hop: self.hop,
            series_len: self.series_len,
        }
    }

    /// Checks the data-layout fields (seeds and ranks may differ).
    pub fn check_layout(&self, other: &Fingerprint) -> Result<()> {
        let mismatch = |what: &str, a: String, b: String| {
            Err(Error::Incompatible(format!(
                "{what} differs: codebook has {a}, input has {b}"
            )))
        };
        if self.segment_len != other.segment_len {
            return mismatch(
                "segment length",
                self.segment_len.to_string(),
                other.segment_len.to_string(),
            );
        }
        if self.hop != other.hop {
            return mismatch("hop", self.hop.to_string(), other.hop.to_string());
        }
        if self.series_len != other.series_len {
            return mismatch(
                "series length",
                self.series_len.to_string(),
                other.series_len.to_string(),
            );
        }
        if self.sample_rate_hz != other.sample_rate_hz {
            return mismatch(
                "sample rate",
                self.sample_rate_hz.to_string(),
                other.sample_rate_hz.to_string(),
            );
        }
        if self.offset_degrees != other.offset_degrees {
            return mismatch(
                "angle offset",
                self.offset_degrees.to_string(),
                other.offset_degrees.to_string(),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub nmf: NmfConfig,
    pub gmm: GmmConfig,
    /// Master seed; NMF and GMM seeds are derived from it.
    pub seed: u64,
    pub offset_degrees: f64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            nmf: NmfConfig::default(),
            gmm: GmmConfig::default(),
            seed: 0,
            offset_degrees: DEFAULT_OFFSET_DEGREES,
        }
    }
}

impl DiscoveryConfig {
    pub fn fingerprint(&self) -> Fingerprint {
        let seg = Segmentation::default();
        Fingerprint {
            segment_len: seg.segment_len,
            hop: seg.hop,
            series_len: seg.series_len,
            sample_rate_hz: crate::ingest::CANONICAL_RATE_HZ,
            offset_degrees: self.offset_degrees,
            nmf_rank: self.nmf.rank,
            kinemes: self.gmm.components,
            nmf_seed: derive_seed(self.seed, &[1]),
            gmm_seed: derive_seed(self.seed, &[2]),
        }
    }
}

/// Which corpus and videos a codebook was learned from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTag {
    pub corpus: String,
    pub video_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Codebook {
    fingerprint: Fingerprint,
    source: SourceTag,
    nmf: NmfModel,
    gmm: GmmModel,
    kinemes: Array2<f64>,
    projector: Projector,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
            && self.source == other.source
            && self.nmf == other.nmf
            && self.gmm == other.gmm
            && self.kinemes == other.kinemes
    }
}

impl Codebook {
    /// Assembles a codebook and computes `H* = B C*`.
    pub fn from_parts(fingerprint: Fingerprint, source: SourceTag, nmf: NmfModel, gmm: GmmModel) -> Result<Self> {
        let seg = fingerprint.segmentation();
        if nmf.dim() != seg.dim() {
            return Err(Error::Contract(format!(
                "basis has {} rows, segments have {}",
                nmf.dim(),
                seg.dim()
            )));
        }
        if gmm.dim() != nmf.rank() {
            return Err(Error::Contract(format!(
                "GMM dimension {} does not match NMF rank {}",
                gmm.dim(),
                nmf.rank()
            )));
        }
        if gmm.means.iter().any(|&v| v < 0.0) {
            return Err(Error::Contract("kineme centres must be non-negative".into()));
        }
        let kinemes = nmf.basis.dot(&gmm.means);
        let projector = nmf.projector();
        Ok(Codebook {
            fingerprint,
            source,
            nmf,
            gmm,
            kinemes,
            projector,
        })
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn source(&self) -> &SourceTag {
        &self.source
    }

    pub fn nmf(&self) -> &NmfModel {
        &self.nmf
    }

    pub fn gmm(&self) -> &GmmModel {
        &self.gmm
    }

    /// `m x k` kineme trajectories in pose space.
    pub fn kinemes(&self) -> &Array2<f64> {
        &self.kinemes
    }

    pub fn len(&self) -> usize {
        self.kinemes.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.kinemes.ncols() == 0
    }

    pub fn kineme(&self, label: KinemeLabel) -> ArrayView1<'_, f64> {
        self.kinemes.column(label.index())
    }

    /// Kineme `j` as an `segment_len x 3` trajectory (columns pitch, yaw, roll).
    pub fn trajectory(&self, label: KinemeLabel) -> Array2<f64> {
        let l = self.fingerprint.segment_len;
        let col = self.kineme(label);
        Array2::from_shape_fn((l, 3), |(t, a)| col[a * l + t])
    }

    /// Largest `|H* - B C*|` after recomputing the product.
    pub fn consistency_error(&self) -> f64 {
        let recomputed = self.nmf.basis.dot(&self.gmm.means);
        recomputed
            .iter()
            .zip(self.kinemes.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            fingerprint: self.fingerprint,
            source: self.source.clone(),
            nmf_objective_trace: self.nmf.objective_trace.clone(),
            nmf_seed: self.nmf.seed,
            gmm_loglik_trace: self.gmm.loglik_trace.clone(),
            gmm_final_loglik: self.gmm.final_loglik,
            gmm_clamped_entries: self.gmm.clamped_entries,
            gmm_reseeds: self.gmm.reseeds,
            gmm_warnings: self.gmm.warnings.clone(),
            gmm_seed: self.gmm.seed,
        };
        let header = serde_json::to_string(&header)?;
        let weights = self.gmm.weights.view().insert_axis(Axis(0));
        Ok(container::encode(
            KIND,
            &header,
            &[
                ("basis", self.nmf.basis.view()),
                ("gmm_means", self.gmm.means.view()),
                ("gmm_variances", self.gmm.variances.view()),
                ("gmm_weights", weights),
                ("kinemes", self.kinemes.view()),
            ],
        ))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const WHAT: &str = "codebook";
        let mut contents = container::decode(bytes, KIND, WHAT)?;
        let header: Header = serde_json::from_str(&contents.header)?;
        let basis = contents.take("basis", WHAT)?;
        let means = contents.take("gmm_means", WHAT)?;
        let variances = contents.take("gmm_variances", WHAT)?;
        let weights = contents.take("gmm_weights", WHAT)?.row(0).to_owned();
        let stored = contents.take("kinemes", WHAT)?;
        let nmf = NmfModel {
            basis,
            objective_trace: header.nmf_objective_trace,
            seed: header.nmf_seed,
        };
        let gmm = GmmModel {
            means,
            variances,
            weights,
            loglik_trace: header.gmm_loglik_trace,
            final_loglik: header.gmm_final_loglik,
            clamped_entries: header.gmm_clamped_entries,
            reseeds: header.gmm_reseeds,
            warnings: header.gmm_warnings,
            seed: header.gmm_seed,
        };
        let cb = Codebook::from_parts(header.fingerprint, header.source, nmf, gmm)?;
        if cb.kinemes.dim() != stored.dim()
            || cb
                .kinemes
                .iter()
                .zip(stored.iter())
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return Err(Error::Contract("stored kinemes differ from B C*".into()));
        }
        Ok(cb)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: Fingerprint,
    source: SourceTag,
    nmf_objective_trace: Vec<f64>,
    nmf_seed: u64,
    gmm_loglik_trace: Vec<f64>,
    gmm_final_loglik: f64,
    gmm_clamped_entries: usize,
    gmm_reseeds: usize,
    gmm_warnings: Vec<String>,
    gmm_seed: u64,
}

pub fn save_codebook(cb: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, cb.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Codebook::from_bytes(&bytes)
}

/// Learns a codebook from the low-labelled videos of a corpus.
///
/// Series are matched to manifest records by video id; high-labelled videos
/// never touch the factorisation or the mixture.
pub fn discover_kinemes(
    corpus: &[AngleSeries],
    manifest: &CorpusManifest,
    config: &DiscoveryConfig,
    source_name: &str,
) -> Result<Codebook> {
    if corpus.is_empty() {
        return Err(Error::Config("kineme discovery needs a non-empty corpus".into()));
    }
    let fingerprint = config.fingerprint();
    let seg = fingerprint.segmentation();
    let mut parts = Vec::new();
    let mut ids = Vec::new();
    for series in corpus {
        let record = manifest
            .get(series.video_id())
            .ok_or_else(|| Error::Config(format!("series '{}' has no manifest record", series.video_id())))?;
        if record.binary_label == BinaryLabel::Low {
            parts.push(seg.segment(series)?);
            ids.push(series.video_id().to_string());
        }
    }
    if parts.is_empty() {
        return Err(Error::Config(format!(
            "corpus '{source_name}' has no low-labelled videos to learn kinemes from"
        )));
    }
    let pooled = SegmentMatrix::concat(&parts)?;
    if pooled.len() < config.gmm.components {
        return Err(Error::Config(format!(
            "{} pooled segments cannot support {} kinemes",
            pooled.len(),
            config.gmm.components
        )));
    }
    let (nmf, coefficients) = fit_nmf(
        pooled.columns().view(),
        config.nmf.rank,
        fingerprint.nmf_seed,
        config.nmf.tol,
        config.nmf.max_iter,
    )?;
    let gmm = fit_gmm(
        coefficients.view(),
        config.gmm.components,
        fingerprint.gmm_seed,
        config.gmm.tol,
        config.gmm.max_iter,
    )?;
    Codebook::from_parts(
        fingerprint,
        SourceTag {
            corpus: source_name.to_string(),
            video_ids: ids,
        },
        nmf,
        gmm,
    )
}

/// A video expressed as a sequence of kinemes.
#[derive(Debug, Clone, PartialEq)]
pub struct KinemeSequence {
    pub video_id: String,
    pub labels: Vec<KinemeLabel>,
    /// `q x s` projected coefficients.
    pub coefficients: Array2<f64>,
    /// Per-segment projection residual `||h - B c||`.
    pub residuals: Vec<f64>,
    /// The segments that were encoded.
    pub segments: SegmentMatrix,
}

/// Projects every segment of `series` onto the codebook basis and assigns the
/// maximum-posterior kineme.
pub fn encode_series(cb: &Codebook, series: &AngleSeries) -> Result<KinemeSequence> {
    let fp = cb.fingerprint();
    if series.len() != fp.series_len {
        return Err(Error::Incompatible(format!(
            "series '{}' has {} samples, codebook expects {}",
            series.video_id(),
            series.len(),
            fp.series_len
        )));
    }
    let segments = fp.segmentation().segment(series)?;
    let q = cb.nmf.rank();
    let mut coefficients = Array2::zeros((q, segments.len()));
    let mut labels = Vec::with_capacity(segments.len());
    let mut residuals = Vec::with_capacity(segments.len());
    for i in 0..segments.len() {
        let p = cb.projector.project(segments.column(i))?;
        labels.push(cb.gmm.assign(p.coefficients.view()));
        residuals.push(p.residual);
        coefficients.column_mut(i).assign(&p.coefficients);
    }
    Ok(KinemeSequence {
        video_id: series.video_id().to_string(),
        labels,
        coefficients,
        residuals,
        segments,
    })
}

/// Pose-space trajectory `h~` of kineme `label` (one-based), laid out
/// `[pitch | yaw | roll]`.
pub fn reconstruct_segment(cb: &Codebook, label: usize) -> Result<Array1<f64>> {
    let label = KinemeLabel::new(label, cb.len())?;
    Ok(cb.kineme(label).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ManifestRecord, Scale};
    use ndarray::Array1;

    fn record(id: &str, label: BinaryLabel) -> ManifestRecord {
        ManifestRecord {
            video_id: id.into(),
            series_path: format!("{id}.csv").into(),
            scale: Scale::QidsSr,
            raw_score: if label == BinaryLabel::Low { 2 } else { 20 },
            binary_label: label,
        }
    }

    /// Periodic nods with a 2.5 s period, distinct per video.
    fn periodic_series(id: &str, amp: f64, phase: f64) -> AngleSeries {
        let samples = Array2::from_shape_fn((3000, 3), |(t, a)| {
            let w = 2.0 * std::f64::consts::PI * t as f64 / 25.0;
            180.0 + amp * (1.0 - 0.3 * a as f64) * (w + phase + a as f64).sin()
        });
        AngleSeries::new(id, samples, 10.0).unwrap()
    }

    fn small_config() -> DiscoveryConfig {
        DiscoveryConfig {
            nmf: NmfConfig {
                rank: 4,
                tol: 1e-6,
                max_iter: 200,
            },
            gmm: GmmConfig {
                components: 3,
                tol: 1e-6,
                max_iter: 100,
            },
            seed: 5,
            ..DiscoveryConfig::default()
        }
    }

    fn corpus() -> (Vec<AngleSeries>, CorpusManifest) {
        let series = vec![
            periodic_series("a", 10.0, 0.0),
            periodic_series("b", 5.0, 1.0),
            periodic_series("c", 15.0, 2.0),
            periodic_series("x", 2.0, 0.5),
            periodic_series("y", 1.0, 1.5),
            periodic_series("z", 3.0, 2.5),
        ];
        let manifest = CorpusManifest {
            records: vec![
                record("a", BinaryLabel::Low),
                record("b", BinaryLabel::Low),
                record("c", BinaryLabel::Low),
                record("x", BinaryLabel::High),
                record("y", BinaryLabel::High),
                record("z", BinaryLabel::High),
            ],
            base_dir: Default::default(),
        };
        (series, manifest)
    }

    #[test]
    fn pools_only_low_videos() {
        let (series, manifest) = corpus();
        let cb = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        assert_eq!(cb.source().video_ids, ["a", "b", "c"]);
        assert_eq!(cb.len(), 3);
        assert_eq!(cb.kinemes().nrows(), 150);
        assert!(cb.kinemes().iter().all(|&v| v >= 0.0));
        assert_eq!(cb.consistency_error(), 0.0);
        assert_eq!(cb.trajectory(KinemeLabel::from_index(0)).dim(), (50, 3));
    }

    #[test]
    fn high_videos_do_not_influence_codebook() {
        let (mut series, manifest) = corpus();
        let a = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        series[3] = periodic_series("x", 30.0, 0.1);
        series.swap(4, 5);
        let b = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }

    #[test]
    fn needs_low_videos() {
        let (series, mut manifest) = corpus();
        for r in &mut manifest.records {
            r.binary_label = BinaryLabel::High;
        }
        assert!(matches!(
            discover_kinemes(&series, &manifest, &small_config(), "toy"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn encode_is_pure_and_recovers_source_patterns() {
        let (series, manifest) = corpus();
        let cb = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        let seq = encode_series(&cb, &series[0]).unwrap();
        assert_eq!(seq.labels.len(), 119);
        assert_eq!(seq.coefficients.dim(), (4, 119));
        assert_eq!(seq, encode_series(&cb, &series[0]).unwrap());
        // every segment of a 2.5 s periodic video is the same pattern
        assert!(seq.labels.iter().all(|&l| l == seq.labels[0]));
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let (series, manifest) = corpus();
        let cb = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        let short = AngleSeries::new("s", Array2::from_elem((2000, 3), 180.0), 10.0).unwrap();
        assert!(matches!(encode_series(&cb, &short), Err(Error::Incompatible(_))));
    }

    #[test]
    fn identity_factorisation_reconstruction() {
        let fp = Fingerprint {
            segment_len: 50,
            hop: 25,
            series_len: 3000,
            sample_rate_hz: 10.0,
            offset_degrees: 180.0,
            nmf_rank: 150,
            kinemes: 2,
            nmf_seed: 0,
            gmm_seed: 0,
        };
        let nmf = NmfModel {
            basis: Array2::eye(150),
            objective_trace: vec![0.0],
            seed: 0,
        };
        let mut means = Array2::zeros((150, 2));
        means[[7, 0]] = 1.0;
        means[[42, 1]] = 1.0;
        let gmm = GmmModel {
            means,
            variances: Array2::ones((150, 2)),
            weights: Array1::from_elem(2, 0.5),
            loglik_trace: vec![],
            final_loglik: 0.0,
            clamped_entries: 0,
            reseeds: 0,
            warnings: vec![],
            seed: 0,
        };
        let source = SourceTag {
            corpus: "id".into(),
            video_ids: vec![],
        };
        let cb = Codebook::from_parts(fp, source, nmf, gmm).unwrap();
        let h = reconstruct_segment(&cb, 1).unwrap();
        assert_eq!(h.len(), 150);
        assert_eq!(h[7], 1.0);
        assert_eq!(h.sum(), 1.0);
        assert_eq!(reconstruct_segment(&cb, 2).unwrap()[42], 1.0);
        assert_eq!(reconstruct_segment(&cb, 1).unwrap(), h);
        assert!(reconstruct_segment(&cb, 0).is_err());
        assert!(reconstruct_segment(&cb, 3).is_err());
    }

    #[test]
    fn save_load_round_trip_and_corruption() {
        let (series, manifest) = corpus();
        let cb = discover_kinemes(&series, &manifest, &small_config(), "toy").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.kcb");
        save_codebook(&cb, &path).unwrap();
        let back = load_codebook(&path).unwrap();
        assert_eq!(back.nmf, cb.nmf);
        assert_eq!(back.gmm.loglik_trace, cb.gmm.loglik_trace);
        assert_eq!(back.gmm.final_loglik, cb.gmm.final_loglik);
        assert_eq!(back, cb);
        assert_eq!(back.consistency_error(), 0.0);

        let bytes = fs::read(&path).unwrap();
        assert!(matches!(
            Codebook::from_bytes(&bytes[..bytes.len() / 2]),
            Err(Error::Checksum)
        ));
        let mut old = bytes.clone();
        old[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            Codebook::from_bytes(&old),
            Err(Error::UnsupportedVersion { .. })
        ));
    }

    #[test]
    fn layout_check() {
        let a = small_config().fingerprint();
        let mut b = a;
        b.offset_degrees = 0.0;
        assert!(matches!(a.check_layout(&b), Err(Error::Incompatible(_))));
        b = a;
        b.nmf_seed += 1;
        assert!(a.check_layout(&b).is_ok());
    }
}
