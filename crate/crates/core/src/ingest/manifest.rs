use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Depression severity questionnaire a raw score is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "BDI")]
    Bdi,
    #[serde(rename = "HRSD")]
    Hrsd,
    #[serde(rename = "QIDS-SR")]
    QidsSr,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Bdi => "BDI",
            Scale::Hrsd => "HRSD",
            Scale::QidsSr => "QIDS-SR",
        }
    }

    /// Largest valid raw score.
    pub fn max_score(self) -> u32 {
        match self {
            Scale::Bdi => 63,
            Scale::Hrsd => 52,
            Scale::QidsSr => 27,
        }
    }

    /// Highest score still labelled `low`, for scales with a fixed cut-off.
    ///
    /// QIDS-SR corpora carry clinician-assigned groups, so their labels are
    /// taken as given.
    pub fn low_threshold(self) -> Option<u32> {
        match self {
            Scale::Bdi => Some(13),
            Scale::Hrsd => Some(7),
            Scale::QidsSr => None,
        }
    }

    pub fn label_for(self, score: u32) -> Option<BinaryLabel> {
        self.low_threshold()
            .map(|t| if score > t { BinaryLabel::High } else { BinaryLabel::Low })
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "BDI" => Ok(Scale::Bdi),
            "HRSD" => Ok(Scale::Hrsd),
            "QIDS-SR" => Ok(Scale::QidsSr),
            other => Err(format!("unknown scale '{other}' (expected BDI, HRSD or QIDS-SR)")),
        }
    }
}

/// Binary severity class; `Low` is the healthy / low-depressed cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Low,
    High,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Low => "low",
            BinaryLabel::High => "high",
        }
    }

    /// `0.0` for low, `1.0` for high.
    pub fn as_target(self) -> f64 {
        match self {
            BinaryLabel::Low => 0.0,
            BinaryLabel::High => 1.0,
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinaryLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "low" => Ok(BinaryLabel::Low),
            "high" => Ok(BinaryLabel::High),
            other => Err(format!("unknown label '{other}' (expected low or high)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub video_id: String,
    /// Pose CSV location; relative paths resolve against the manifest directory.
    pub series_path: PathBuf,
    pub scale: Scale,
    pub raw_score: u32,
    pub binary_label: BinaryLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory relative series paths resolve against.
    pub base_dir: PathBuf,
}

const HEADER: [&str; 5] = ["video_id", "series_path", "scale", "raw_score", "binary_label"];

impl CorpusManifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, video_id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        if record.series_path.is_absolute() {
            record.series_path.clone()
        } else {
            self.base_dir.join(&record.series_path)
        }
    }

    pub fn low_ids(&self) -> impl Iterator<Item = &str> {
        self.records
            .iter()
            .filter(|r| r.binary_label == BinaryLabel::Low)
            .map(|r| r.video_id.as_str())
    }

    /// Parses and validates manifest CSV text. `origin` is used for messages
    /// and as the base directory.
    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Manifest {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(err(1, format!("header must be '{}'", HEADER.join(","))));
        }
        let mut seen = HashSet::new();
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| err(line, e.to_string()))?;
            let video_id = row[0].to_string();
            if video_id.is_empty() {
                return Err(err(line, "empty video_id".into()));
            }
            let scale: Scale = row[2].parse().map_err(|m| err(line, m))?;
            let raw_score: u32 = row[3]
                .parse()
                .map_err(|_| err(line, format!("raw_score '{}' is not a non-negative integer", &row[3])))?;
            if raw_score > scale.max_score() {
                return Err(err(
                    line,
                    format!("{scale} score {raw_score} exceeds maximum {}", scale.max_score()),
                ));
            }
            let binary_label: BinaryLabel = row[4].parse().map_err(|m| err(line, m))?;
            if let Some(expected) = scale.label_for(raw_score) {
                if expected != binary_label {
                    return Err(err(
                        line,
                        format!("label '{binary_label}' contradicts {scale} score {raw_score} (expected '{expected}')"),
                    ));
                }
            }
            if !seen.insert(video_id.clone()) {
                return Err(err(line, format!("duplicate video_id '{video_id}'")));
            }
            records.push(ManifestRecord {
                video_id,
                series_path: PathBuf::from(&row[1]),
                scale,
                raw_score,
                binary_label,
            });
        }
        Ok(CorpusManifest {
            records,
            base_dir: origin.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn write<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let csv_err = |e: csv::Error| Error::format("<manifest output>", e.to_string());
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(HEADER).map_err(csv_err)?;
        for r in &self.records {
            wtr.write_record([
                r.video_id.as_str(),
                &r.series_path.to_string_lossy(),
                r.scale.as_str(),
                &r.raw_score.to_string(),
                r.binary_label.as_str(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<manifest output>", e))?;
        Ok(())
    }
}

/// Reads and validates a corpus manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<CorpusManifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    CorpusManifest::from_reader(file, path)
}
