//! Evaluation protocols: repeated stratified k-fold within pooled corpora,
//! and train-on-some / test-on-others transfer.
//!
//! Folds are formed over videos, not chunks. Chunk predictions are
//! aggregated per video (majority vote or mean) before scoring.

pub mod conversion;
pub mod metrics;
pub mod report;

use std::collections::BTreeSet;
use std::path::PathBuf;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{discover_kinemes, Codebook, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureMatrix, FeatureRow, FEATURE_COUNT};
use crate::ingest::{BinaryLabel, Corpus, Scale, SUPPORTED_CHUNK_SECONDS};
use crate::models::{
    labels_to_targets, target_to_label, train_normalised, Family, Hyperparameters, ModelSpec, Task, TrainedModel,
};
use crate::rng::{derive_seed, rng_for};

pub use conversion::{convert_severity, ConversionTable, Conversions};
pub use metrics::{classification_metrics, regression_metrics, ClassificationMetrics, RegressionMetrics, Summary};
pub use report::{Cell, EvalReport, PredictionRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Kfold,
    Transfer,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Kfold => "kfold",
            Protocol::Transfer => "transfer",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" => Ok(Protocol::Kfold),
            "transfer" => Ok(Protocol::Transfer),
            _ => Err(Error::Config(format!("unknown protocol '{s}' (kfold, transfer)"))),
        }
    }
}

/// Finite hyperparameter grid searched by the transfer protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub forest_max_depth: Vec<usize>,
    pub boosted_learning_rate: Vec<f64>,
    pub boosted_max_depth: Vec<usize>,
    pub svm_lambda: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            forest_max_depth: vec![4, 8, 16],
            boosted_learning_rate: vec![0.05, 0.1],
            boosted_max_depth: vec![2, 3],
            svm_lambda: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

impl HyperGrid {
    /// Candidate specs in grid order.
    pub fn candidates(&self, base: &Hyperparameters, family: Family, task: Task, seed: u64) -> Vec<ModelSpec> {
        let spec = base.spec(family, task, seed);
        match family {
            Family::Forest => self
                .forest_max_depth
                .iter()
                .map(|&d| ModelSpec {
                    max_depth: Some(d),
                    ..spec.clone()
                })
                .collect(),
            Family::Boosted => self
                .boosted_learning_rate
                .iter()
                .flat_map(|&lr| {
                    let spec = spec.clone();
                    self.boosted_max_depth.iter().map(move |&d| ModelSpec {
                        learning_rate: lr,
                        max_depth: Some(d),
                        ..spec.clone()
                    })
                })
                .collect(),
            Family::Svm => self
                .svm_lambda
                .iter()
                .map(|&lambda| ModelSpec { lambda, ..spec.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub protocol: Protocol,
    /// Corpora pooled for k-fold, or the training side of a transfer run.
    pub datasets: Vec<String>,
    /// Held-out corpora of a transfer run.
    pub test_datasets: Vec<String>,
    /// Corpus whose low-labelled videos the codebook is learned from.
    pub codebook_source: String,
    pub chunk_seconds: u32,
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub families: Vec<Family>,
    pub tasks: Vec<Task>,
    /// Whether a tied chunk vote goes to the high class.
    pub tie_to_high: bool,
    pub discovery: DiscoveryConfig,
    pub models: Hyperparameters,
    pub grid: HyperGrid,
    pub bdi_table: Option<PathBuf>,
    pub hrsd_table: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: Protocol::Kfold,
            datasets: Vec::new(),
            test_datasets: Vec::new(),
            codebook_source: String::new(),
            chunk_seconds: 60,
            repetitions: 5,
            folds: 10,
            seed: 0,
            families: Family::ALL.to_vec(),
            tasks: vec![Task::Classify, Task::Regress],
            tie_to_high: true,
            discovery: DiscoveryConfig::default(),
            models: Hyperparameters::default(),
            grid: HyperGrid::default(),
            bdi_table: None,
            hrsd_table: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1");
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured");
        }
        if self.codebook_source.is_empty() {
            return bad("codebook_source is not set");
        }
        if self.families.is_empty() || self.tasks.is_empty() {
            return bad("at least one model family and one task are required");
        }
        if !SUPPORTED_CHUNK_SECONDS.contains(&self.chunk_seconds) {
            return Err(Error::Config(format!(
                "unsupported chunk size {} s (supported: 60, 75, 90, 120)",
                self.chunk_seconds
            )));
        }
        Ok(())
    }

    pub fn conversions(&self) -> Result<Conversions> {
        let mut c = Conversions::default();
        if let Some(p) = &self.bdi_table {
            c.bdi = ConversionTable::load(Scale::Bdi, p)?;
        }
        if let Some(p) = &self.hrsd_table {
            c.hrsd = ConversionTable::load(Scale::Hrsd, p)?;
        }
        Ok(c)
    }
}

/// Chunk features of one video with its targets.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub video_id: String,
    pub corpus: String,
    pub label: BinaryLabel,
    /// QIDS-SR equivalent.
    pub severity: f64,
    pub chunks: Vec<[f64; FEATURE_COUNT]>,
}

/// Encodes every video of `corpus` against `cb` and summarises its chunks.
pub fn corpus_features(
    cb: &Codebook,
    corpus: &Corpus,
    chunk_seconds: u32,
    conversions: &Conversions,
) -> Result<Vec<VideoFeatures>> {
    corpus
        .manifest
        .records
        .par_iter()
        .zip(&corpus.series)
        .map(|(record, series)| {
            let chunks = extract_features(cb, series, chunk_seconds)?;
            Ok(VideoFeatures {
                video_id: record.video_id.clone(),
                corpus: corpus.name.clone(),
                label: record.binary_label,
                severity: conversions.to_qids(record.scale, record.raw_score)? as f64,
                chunks: chunks.into_iter().map(|c| c.values).collect(),
            })
        })
        .collect()
}

pub fn to_feature_matrix(videos: &[VideoFeatures]) -> FeatureMatrix {
    FeatureMatrix::new(
        videos
            .iter()
            .flat_map(|v| {
                v.chunks.iter().enumerate().map(|(i, c)| FeatureRow {
                    video_id: v.video_id.clone(),
                    chunk_index: i,
                    values: *c,
                    label: v.label,
                    severity: v.severity,
                })
            })
            .collect(),
    )
}

/// Groups feature rows by video, in order of first appearance.
pub fn from_feature_matrix(m: &FeatureMatrix, corpus: &str) -> Result<Vec<VideoFeatures>> {
    let mut out: Vec<VideoFeatures> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for row in &m.rows {
        let i = *index.entry(row.video_id.clone()).or_insert_with(|| {
            out.push(VideoFeatures {
                video_id: row.video_id.clone(),
                corpus: corpus.to_string(),
                label: row.label,
                severity: row.severity,
                chunks: Vec::new(),
            });
            out.len() - 1
        });
        let v = &mut out[i];
        if v.label != row.label || v.severity != row.severity {
            return Err(Error::Config(format!(
                "video '{}' has inconsistent targets across chunks",
                row.video_id
            )));
        }
        v.chunks.push(row.values);
    }
    Ok(out)
}

/// Majority vote (classification, ties per `tie_to_high`) or mean.
pub fn aggregate_video(chunk_predictions: &[f64], task: Task, tie_to_high: bool) -> Result<f64> {
    if chunk_predictions.is_empty() {
        return Err(Error::Contract("cannot aggregate zero chunk predictions".into()));
    }
    let n = chunk_predictions.len();
    Ok(match task {
        Task::Classify => {
            let high = chunk_predictions.iter().filter(|&&p| p > 0.5).count();
            match (2 * high).cmp(&n) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => f64::from(u8::from(tie_to_high)),
            }
        }
        Task::Regress => chunk_predictions.iter().sum::<f64>() / n as f64,
    })
}

/// Fold index per video. Each class is shuffled, then videos are dealt
/// round-robin with one counter running across both classes.
pub fn stratified_folds(labels: &[BinaryLabel], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config("folds must be at least 2".into()));
    }
    if labels.len() < folds {
        return Err(Error::Config(format!(
            "{} videos cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = rng_for(seed, &[]);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for class in [BinaryLabel::Low, BinaryLabel::High] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}

fn targets(videos: &[VideoFeatures], task: Task) -> Vec<f64> {
    match task {
        Task::Classify => labels_to_targets(&videos.iter().map(|v| v.label).collect::<Vec<_>>()),
        Task::Regress => videos.iter().map(|v| v.severity).collect(),
    }
}

/// Stacks the chunks of the selected videos into rows.
fn stack(videos: &[VideoFeatures], idx: &[usize], task: Task) -> (Array2<f64>, Vec<f64>) {
    let y_video = targets(videos, task);
    let rows: Vec<&[f64; FEATURE_COUNT]> = idx.iter().flat_map(|&i| &videos[i].chunks).collect();
    let y = idx
        .iter()
        .flat_map(|&i| std::iter::repeat_n(y_video[i], videos[i].chunks.len()))
        .collect();
    let x = Array2::from_shape_fn((rows.len(), FEATURE_COUNT), |(r, c)| rows[r][c]);
    (x, y)
}

/// Fits normaliser and model on the chunks of the training videos only.
pub fn fit_on_videos(spec: &ModelSpec, videos: &[VideoFeatures], train: &[usize]) -> Result<TrainedModel> {
    let (x, y) = stack(videos, train, spec.task);
    train_normalised(spec, x.view(), &y)
}

/// One aggregated prediction per selected video.
pub fn predict_videos(
    model: &TrainedModel,
    videos: &[VideoFeatures],
    idx: &[usize],
    tie_to_high: bool,
) -> Result<Vec<f64>> {
    idx.iter()
        .map(|&i| {
            let v = &videos[i];
            let x = Array2::from_shape_fn((v.chunks.len(), FEATURE_COUNT), |(r, c)| v.chunks[r][c]);
            aggregate_video(&model.predict(x.view())?, model.task(), tie_to_high)
        })
        .collect()
}

/// Per-run scores for one (family, task).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Score {
    Class(ClassificationMetrics),
    Reg(RegressionMetrics),
}

fn score(videos: &[VideoFeatures], idx: &[usize], task: Task, pred: &[f64]) -> Result<Score> {
    let truth = targets(videos, task);
    let truth: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
    Ok(match task {
        Task::Classify => {
            let t: Vec<BinaryLabel> = truth.iter().map(|&v| target_to_label(v)).collect();
            let p: Vec<BinaryLabel> = pred.iter().map(|&v| target_to_label(v)).collect();
            Score::Class(classification_metrics(&t, &p)?)
        }
        Task::Regress => Score::Reg(regression_metrics(&truth, pred)?),
    })
}

fn find<'a>(corpora: &'a [Corpus], name: &str) -> Result<&'a Corpus> {
    corpora
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("corpus '{name}' is not loaded")))
}

/// Learns the codebook once from the configured source corpus.
pub fn learn_codebook(config: &EvalConfig, corpora: &[Corpus]) -> Result<Codebook> {
    let source = find(corpora, &config.codebook_source)?;
    discover_kinemes(&source.series, &source.manifest, &config.discovery, &source.name)
}

fn gather(
    config: &EvalConfig,
    corpora: &[Corpus],
    names: &[String],
    cb: &Codebook,
    conv: &Conversions,
) -> Result<Vec<VideoFeatures>> {
    let mut out = Vec::new();
    for name in names {
        out.extend(corpus_features(cb, find(corpora, name)?, config.chunk_seconds, conv)?);
    }
    Ok(out)
}

fn check_unique_ids(videos: &[VideoFeatures]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for v in videos {
        if !seen.insert(v.video_id.as_str()) {
            return Err(Error::Protocol(format!(
                "video id '{}' appears in more than one pooled corpus",
                v.video_id
            )));
        }
    }
    Ok(())
}

fn model_seed(seed: u64, rep: usize, fold: usize, family: Family, task: Task) -> u64 {
    derive_seed(seed, &[2, rep as u64, fold as u64, family as u64, task as u64])
}

/// Repeated stratified k-fold over the pooled `datasets`.
pub fn run_kfold(config: &EvalConfig, corpora: &[Corpus]) -> Result<EvalReport> {
    config.validate()?;
    let conv = config.conversions()?;
    let cb = learn_codebook(config, corpora)?;
    let videos = gather(config, corpora, &config.datasets, &cb, &conv)?;
    check_unique_ids(&videos)?;
    kfold_on_features(config, &cb, &videos)
}

/// The k-fold protocol on already extracted features.
pub fn kfold_on_features(config: &EvalConfig, cb: &Codebook, videos: &[VideoFeatures]) -> Result<EvalReport> {
    config.validate()?;
    let labels: Vec<BinaryLabel> = videos.iter().map(|v| v.label).collect();
    let assignments = (0..config.repetitions)
        .map(|rep| stratified_folds(&labels, config.folds, derive_seed(config.seed, &[1, rep as u64])))
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|r| (0..config.folds).map(move |f| (r, f)))
        .collect();
    let combos: Vec<(Family, Task)> = config
        .families
        .iter()
        .flat_map(|&f| config.tasks.iter().map(move |&t| (f, t)))
        .collect();

    let results = runs
        .par_iter()
        .map(|&(rep, fold)| {
            let test: Vec<usize> = (0..videos.len()).filter(|&i| assignments[rep][i] == fold).collect();
            let train: Vec<usize> = (0..videos.len()).filter(|&i| assignments[rep][i] != fold).collect();
            if [BinaryLabel::Low, BinaryLabel::High]
                .iter()
                .any(|c| !train.iter().any(|&i| videos[i].label == *c))
            {
                return Err(Error::Training(format!(
                    "repetition {rep}, fold {fold}: training split lacks a class; too few videos per class for {} folds",
                    config.folds
                )));
            }
            combos
                .iter()
                .map(|&(family, task)| {
                    let spec = config.models.spec(family, task, model_seed(config.seed, rep, fold, family, task));
                    let model = fit_on_videos(&spec, videos, &train)?;
                    let pred = predict_videos(&model, videos, &test, config.tie_to_high)?;
                    let s = score(videos, &test, task, &pred)?;
                    let rows = test
                        .iter()
                        .zip(&pred)
                        .map(|(&i, &p)| PredictionRow::new(rep, fold, family, task, &videos[i], p))
                        .collect::<Vec<_>>();
                    Ok((s, rows))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut predictions = Vec::new();
    for (k, &(family, task)) in combos.iter().enumerate() {
        let scores: Vec<Score> = results.iter().map(|r| r[k].0).collect();
        cells.push(Cell::from_scores(family.name(), task, &scores, String::new()));
    }
    for r in results {
        for (_, rows) in r {
            predictions.extend(rows);
        }
    }
    cells = with_best(cells, &config.tasks);
    Ok(EvalReport::new(
        config,
        cb,
        config.datasets.clone(),
        config.datasets.clone(),
        cells,
        predictions,
    ))
}

/// Train on `datasets`, test once on `test_datasets`.
pub fn run_transfer(config: &EvalConfig, corpora: &[Corpus]) -> Result<EvalReport> {
    config.validate()?;
    if config.test_datasets.is_empty() {
        return Err(Error::Config(
            "transfer protocol needs at least one test dataset".into(),
        ));
    }
    if let Some(shared) = config.datasets.iter().find(|d| config.test_datasets.contains(d)) {
        return Err(Error::Protocol(format!(
            "corpus '{shared}' is on both the train and test side"
        )));
    }
    let train_names: BTreeSet<&str> = config.datasets.iter().map(String::as_str).collect();
    for c in corpora.iter().filter(|c| config.test_datasets.contains(&c.name)) {
        for other in corpora.iter().filter(|o| train_names.contains(o.name.as_str())) {
            if let Some(id) = c
                .manifest
                .records
                .iter()
                .find(|r| other.manifest.get(&r.video_id).is_some())
            {
                return Err(Error::Protocol(format!(
                    "video '{}' is in train corpus '{}' and test corpus '{}'",
                    id.video_id, other.name, c.name
                )));
            }
        }
    }
    let conv = config.conversions()?;
    let cb = learn_codebook(config, corpora)?;
    let train_videos = gather(config, corpora, &config.datasets, &cb, &conv)?;
    let test_videos = gather(config, corpora, &config.test_datasets, &cb, &conv)?;
    check_unique_ids(&train_videos)?;
    check_unique_ids(&test_videos)?;
    transfer_on_features(config, &cb, &train_videos, &test_videos)
}

/// The transfer protocol on already extracted features.
pub fn transfer_on_features(
    config: &EvalConfig,
    cb: &Codebook,
    train_videos: &[VideoFeatures],
    test_videos: &[VideoFeatures],
) -> Result<EvalReport> {
    let train_ids: BTreeSet<&str> = train_videos.iter().map(|v| v.video_id.as_str()).collect();
    if let Some(v) = test_videos.iter().find(|v| train_ids.contains(v.video_id.as_str())) {
        return Err(Error::Protocol(format!(
            "video '{}' is on both the train and test side",
            v.video_id
        )));
    }
    if train_videos.is_empty() || test_videos.is_empty() {
        return Err(Error::Config("transfer needs non-empty train and test sets".into()));
    }
    let train_idx: Vec<usize> = (0..train_videos.len()).collect();
    let test_idx: Vec<usize> = (0..test_videos.len()).collect();
    let combos: Vec<(Family, Task)> = config
        .families
        .iter()
        .flat_map(|&f| config.tasks.iter().map(move |&t| (f, t)))
        .collect();
    let results = combos
        .par_iter()
        .map(|&(family, task)| {
            let seed = model_seed(config.seed, 0, 0, family, task);
            let mut best: Option<(f64, ModelSpec, TrainedModel)> = None;
            for spec in config.grid.candidates(&config.models, family, task, seed) {
                let model = fit_on_videos(&spec, train_videos, &train_idx)?;
                let pred = predict_videos(&model, train_videos, &train_idx, config.tie_to_high)?;
                // higher is better: accuracy, or negated MAE
                let fit = match score(train_videos, &train_idx, task, &pred)? {
                    Score::Class(m) => m.accuracy,
                    Score::Reg(m) => -m.mae,
                };
                if best.as_ref().is_none_or(|(b, _, _)| fit > *b) {
                    best = Some((fit, spec, model));
                }
            }
            let (_, spec, model) =
                best.ok_or_else(|| Error::Config(format!("empty hyperparameter grid for {family}")))?;
            let pred = predict_videos(&model, test_videos, &test_idx, config.tie_to_high)?;
            let s = score(test_videos, &test_idx, task, &pred)?;
            let rows: Vec<PredictionRow> = test_idx
                .iter()
                .zip(&pred)
                .map(|(&i, &p)| PredictionRow::new(0, 0, family, task, &test_videos[i], p))
                .collect();
            Ok((s, describe_spec(&spec), rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut predictions = Vec::new();
    for (&(family, task), (s, note, rows)) in combos.iter().zip(results) {
        cells.push(Cell::from_scores(family.name(), task, &[s], note));
        predictions.extend(rows);
    }
    cells = with_best(cells, &config.tasks);
    Ok(EvalReport::new(
        config,
        cb,
        config.datasets.clone(),
        config.test_datasets.clone(),
        cells,
        predictions,
    ))
}

fn describe_spec(spec: &ModelSpec) -> String {
    match spec.family {
        Family::Forest => format!("max_depth={}", spec.max_depth.map_or("none".into(), |d| d.to_string())),
        Family::Boosted => format!(
            "learning_rate={} max_depth={}",
            spec.learning_rate,
            spec.max_depth.map_or("none".into(), |d| d.to_string())
        ),
        Family::Svm => format!("lambda={}", spec.lambda),
    }
}

/// Appends a "best" cell per task: highest mean F1 or lowest mean MAE,
/// first family on ties.
fn with_best(mut cells: Vec<Cell>, tasks: &[Task]) -> Vec<Cell> {
    for &task in tasks {
        let best = cells
            .iter()
            .filter(|c| c.task == task)
            .fold(None::<&Cell>, |acc, c| match acc {
                Some(b) if !c.better_than(b) => Some(b),
                _ => Some(c),
            })
            .cloned();
        if let Some(b) = best {
            let note = format!("best of families: {}", b.model);
            cells.push(Cell {
                model: "best".into(),
                note,
                ..b
            });
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryLabel::{High as H, Low as L};

    #[test]
    fn aggregation() {
        let v = |ls: &[BinaryLabel]| ls.iter().map(|l| l.as_target()).collect::<Vec<_>>();
        assert_eq!(
            aggregate_video(&v(&[L, H, H, L, H]), Task::Classify, true).unwrap(),
            1.0
        );
        assert_eq!(aggregate_video(&v(&[L, H, H, L]), Task::Classify, true).unwrap(), 1.0);
        assert_eq!(aggregate_video(&v(&[L, H, H, L]), Task::Classify, false).unwrap(), 0.0);
        assert_eq!(aggregate_video(&v(&[L, L, H]), Task::Classify, true).unwrap(), 0.0);
        assert_eq!(
            aggregate_video(&[4.0, 6.0, 8.0, 10.0, 12.0], Task::Regress, true).unwrap(),
            8.0
        );
        assert!(aggregate_video(&[], Task::Regress, true).is_err());
    }

    #[test]
    fn two_folds_four_videos() {
        for seed in 0..20 {
            let f = stratified_folds(&[L, H, L, H], 2, seed).unwrap();
            for fold in 0..2 {
                let lows = (0..4).filter(|&i| f[i] == fold && i % 2 == 0).count();
                let highs = (0..4).filter(|&i| f[i] == fold && i % 2 == 1).count();
                assert_eq!((lows, highs), (1, 1));
            }
        }
        assert!(stratified_folds(&[L, H], 3, 0).is_err());
    }

    #[test]
    fn grid_order() {
        let g = HyperGrid::default();
        let h = Hyperparameters::default();
        let c = g.candidates(&h, Family::Boosted, Task::Classify, 1);
        assert_eq!(c.len(), 4);
        assert_eq!((c[1].learning_rate, c[1].max_depth), (0.05, Some(3)));
        assert_eq!(g.candidates(&h, Family::Svm, Task::Regress, 1).len(), 3);
    }
}
