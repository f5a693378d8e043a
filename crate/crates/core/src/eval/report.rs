use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalConfig, Protocol, Score, Summary, VideoFeatures};
use crate::codebook::{Codebook, Fingerprint};
use crate::error::{Error, Result};
use crate::models::{Family, Task};

/// Metrics of one (model, task) over all runs. Classification cells carry
/// accuracy/F1/precision/recall, regression cells MAE/RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub task: Task,
    pub accuracy: Option<Summary>,
    pub f1: Option<Summary>,
    pub precision: Option<Summary>,
    pub recall: Option<Summary>,
    pub mae: Option<Summary>,
    pub rmse: Option<Summary>,
    pub note: String,
}

impl Cell {
    pub(crate) fn from_scores(model: &str, task: Task, scores: &[Score], note: String) -> Cell {
        let mut cell = Cell {
            model: model.to_string(),
            task,
            accuracy: None,
            f1: None,
            precision: None,
            recall: None,
            mae: None,
            rmse: None,
            note,
        };
        let class: Vec<_> = scores
            .iter()
            .filter_map(|s| match s {
                Score::Class(m) => Some(*m),
                Score::Reg(_) => None,
            })
            .collect();
        let reg: Vec<_> = scores
            .iter()
            .filter_map(|s| match s {
                Score::Reg(m) => Some(*m),
                Score::Class(_) => None,
            })
            .collect();
        if !class.is_empty() {
            let of = |f: fn(&super::ClassificationMetrics) -> f64| {
                Some(Summary::of(&class.iter().map(f).collect::<Vec<_>>()))
            };
            cell.accuracy = of(|m| m.accuracy);
            cell.f1 = of(|m| m.f1);
            cell.precision = of(|m| m.precision);
            cell.recall = of(|m| m.recall);
        }
        if !reg.is_empty() {
            cell.mae = Some(Summary::of(&reg.iter().map(|m| m.mae).collect::<Vec<_>>()));
            cell.rmse = Some(Summary::of(&reg.iter().map(|m| m.rmse).collect::<Vec<_>>()));
        }
        cell
    }

    pub(crate) fn better_than(&self, other: &Cell) -> bool {
        match self.task {
            Task::Classify => self.f1.map(|s| s.mean) > other.f1.map(|s| s.mean),
            Task::Regress => match (self.mae, other.mae) {
                (Some(a), Some(b)) => a.mean < b.mean,
                (a, _) => a.is_some(),
            },
        }
    }

    pub fn runs(&self) -> usize {
        self.f1.or(self.mae).map_or(0, |s| s.runs)
    }
}

/// One aggregated video prediction. For classification `truth` and
/// `prediction` are 0 (low) or 1 (high); for regression QIDS-SR points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub repetition: usize,
    pub fold: usize,
    pub model: Family,
    pub task: Task,
    pub corpus: String,
    pub video_id: String,
    pub truth: f64,
    pub prediction: f64,
}

impl PredictionRow {
    pub(crate) fn new(
        repetition: usize,
        fold: usize,
        model: Family,
        task: Task,
        v: &VideoFeatures,
        prediction: f64,
    ) -> Self {
        PredictionRow {
            repetition,
            fold,
            model,
            task,
            corpus: v.corpus.clone(),
            video_id: v.video_id.clone(),
            truth: match task {
                Task::Classify => v.label.as_target(),
                Task::Regress => v.severity,
            },
            prediction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub codebook_source: String,
    pub codebook: Fingerprint,
    pub codebook_videos: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub chunk_seconds: u32,
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub cells: Vec<Cell>,
    pub predictions: Vec<PredictionRow>,
    /// The effective configuration the report was produced with.
    pub config: EvalConfig,
}

const CSV_HEADER: [&str; 21] = [
    "protocol",
    "codebook",
    "train",
    "test",
    "chunk_seconds",
    "model",
    "task",
    "acc_mean",
    "acc_std",
    "f1_mean",
    "f1_std",
    "pre_mean",
    "pre_std",
    "re_mean",
    "re_std",
    "mae_mean",
    "mae_std",
    "rmse_mean",
    "rmse_std",
    "runs",
    "note",
];

fn pm(s: Option<Summary>) -> String {
    s.map_or("-".into(), |s| format!("{:.4} ± {:.4}", s.mean, s.std))
}

fn csv_pair(s: Option<Summary>) -> [String; 2] {
    s.map_or([String::new(), String::new()], |s| {
        [s.mean.to_string(), s.std.to_string()]
    })
}

impl EvalReport {
    pub(crate) fn new(
        config: &EvalConfig,
        cb: &Codebook,
        train: Vec<String>,
        test: Vec<String>,
        cells: Vec<Cell>,
        predictions: Vec<PredictionRow>,
    ) -> Self {
        EvalReport {
            protocol: config.protocol,
            codebook_source: cb.source().corpus.clone(),
            codebook: *cb.fingerprint(),
            codebook_videos: cb.source().video_ids.len(),
            train,
            test,
            chunk_seconds: config.chunk_seconds,
            repetitions: if config.protocol == Protocol::Kfold {
                config.repetitions
            } else {
                1
            },
            folds: if config.protocol == Protocol::Kfold {
                config.folds
            } else {
                1
            },
            seed: config.seed,
            cells,
            predictions,
            config: config.clone(),
        }
    }

    pub fn cell(&self, model: &str, task: Task) -> Option<&Cell> {
        self.cells.iter().find(|c| c.model == model && c.task == task)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "protocol: {}", self.protocol.name());
        let _ = writeln!(
            s,
            "codebook: {}-conf ({} low videos, rank {}, {} kinemes)",
            self.codebook_source, self.codebook_videos, self.codebook.nmf_rank, self.codebook.kinemes
        );
        let _ = writeln!(s, "train: {}", self.train.join("+"));
        let _ = writeln!(s, "test: {}", self.test.join("+"));
        let _ = writeln!(s, "chunk: {} s", self.chunk_seconds);
        if self.protocol == Protocol::Kfold {
            let _ = writeln!(
                s,
                "runs: {} repetitions x {} folds, seed {}",
                self.repetitions, self.folds, self.seed
            );
        } else {
            let _ = writeln!(s, "runs: single held-out pass, seed {}", self.seed);
        }
        for task in [Task::Classify, Task::Regress] {
            let cells: Vec<&Cell> = self.cells.iter().filter(|c| c.task == task).collect();
            if cells.is_empty() {
                continue;
            }
            let _ = writeln!(s);
            match task {
                Task::Classify => {
                    let _ = writeln!(
                        s,
                        "{:<8} {:>17} {:>17} {:>17} {:>17}  note",
                        "model", "Acc", "F1", "Pre", "Re"
                    );
                    for c in cells {
                        let _ = writeln!(
                            s,
                            "{:<8} {:>17} {:>17} {:>17} {:>17}  {}",
                            c.model,
                            pm(c.accuracy),
                            pm(c.f1),
                            pm(c.precision),
                            pm(c.recall),
                            c.note
                        );
                    }
                }
                Task::Regress => {
                    let _ = writeln!(s, "{:<8} {:>17} {:>17}  note", "model", "MAE", "RMSE");
                    for c in cells {
                        let _ = writeln!(s, "{:<8} {:>17} {:>17}  {}", c.model, pm(c.mae), pm(c.rmse), c.note);
                    }
                }
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "config: {}",
            serde_json::to_string(&self.config).expect("config serialises")
        );
        s
    }

    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Contract(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        for c in &self.cells {
            let mut rec = vec![
                self.protocol.name().to_string(),
                format!("{}-conf", self.codebook_source),
                self.train.join("+"),
                self.test.join("+"),
                self.chunk_seconds.to_string(),
                c.model.clone(),
                c.task.name().to_string(),
            ];
            for m in [c.accuracy, c.f1, c.precision, c.recall, c.mae, c.rmse] {
                rec.extend(csv_pair(m));
            }
            rec.push(c.runs().to_string());
            rec.push(c.note.clone());
            w.write_record(&rec).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn predictions_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Contract(e.to_string());
        w.write_record([
            "repetition",
            "fold",
            "model",
            "task",
            "corpus",
            "video_id",
            "truth",
            "prediction",
        ])
        .map_err(err)?;
        for p in &self.predictions {
            w.write_record([
                p.repetition.to_string(),
                p.fold.to_string(),
                p.model.name().to_string(),
                p.task.name().to_string(),
                p.corpus.clone(),
                p.video_id.clone(),
                p.truth.to_string(),
                p.prediction.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.txt`, `report.csv`, `predictions.csv` and `report.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.txt", self.to_text()),
            ("report.csv", self.table_csv()?),
            ("predictions.csv", self.predictions_csv()?),
            ("report.json", self.to_json()?),
        ];
        for (name, text) in files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
