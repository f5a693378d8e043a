//! Reconstruction-error features.
//!
//! For each segment `h` with assigned kineme trajectory `h~`, the signed
//! difference `d = h - h~` is summed per angle. Within a chunk the absolute
//! sums form one vector per angle, summarised by eight order-invariant
//! statistics: 8 x 3 = 24 features per chunk.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::codebook::{encode_series, Codebook, KinemeSequence};
use crate::error::{Error, Result};
use crate::ingest::{chunk_boundaries, Angle, AngleSeries, BinaryLabel};

pub const STATISTICS: [&str; 8] = ["min", "max", "range", "mean", "median", "std", "skewness", "kurtosis"];
pub const FEATURE_COUNT: usize = 24;

/// Column names in storage order, e.g. `pitch_min`, ..., `roll_kurtosis`.
pub fn feature_names() -> Vec<String> {
    Angle::ALL
        .iter()
        .flat_map(|a| STATISTICS.iter().map(move |s| format!("{}_{s}", a.name())))
        .collect()
}

/// The 24 statistics of one chunk of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkFeatures {
    pub video_id: String,
    pub chunk_index: usize,
    pub values: [f64; FEATURE_COUNT],
}

/// `d = h - h~`, elementwise and signed.
pub fn difference_vector(h: ArrayView1<f64>, reconstruction: ArrayView1<f64>) -> Result<Array1<f64>> {
    if h.len() != reconstruction.len() {
        return Err(Error::Contract(format!(
            "segment length {} differs from reconstruction length {}",
            h.len(),
            reconstruction.len()
        )));
    }
    Ok(&h - &reconstruction)
}

/// Signed per-angle sums `(s_p, s_y, s_r)` of a difference vector.
pub fn segment_sum(d: ArrayView1<f64>) -> Result<[f64; 3]> {
    if !d.len().is_multiple_of(3) {
        return Err(Error::Contract(format!(
            "difference vector length {} is not 3 blocks",
            d.len()
        )));
    }
    let l = d.len() / 3;
    let block = |a: usize| d.iter().skip(a * l).take(l).sum::<f64>();
    Ok([block(0), block(1), block(2)])
}

/// min, max, range, mean, median, sample std, skewness, kurtosis.
///
/// Skewness and kurtosis are standardised central moments (population
/// divisor, kurtosis not excess). For a single value or zero spread the
/// last three are 0.
pub fn describe(values: &[f64]) -> [f64; 8] {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[n - 1];
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let (std, skew, kurt) = if n < 2 || max == min {
        (0.0, 0.0, 0.0)
    } else {
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in &sorted {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let nf = n as f64;
        let std = (m2 / (nf - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
        (std, m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    [min, max, max - min, mean, median, std, skew, kurt]
}

/// Summarises the absolute segment sums of one chunk into 24 features.
pub fn chunk_statistics(sums: &[[f64; 3]]) -> Result<[f64; FEATURE_COUNT]> {
    if sums.is_empty() {
        return Err(Error::Contract("chunk has no segments".into()));
    }
    let mut out = [0.0; FEATURE_COUNT];
    for a in 0..3 {
        let abs: Vec<f64> = sums.iter().map(|s| s[a].abs()).collect();
        out[a * 8..(a + 1) * 8].copy_from_slice(&describe(&abs));
    }
    Ok(out)
}

/// Per-segment signed sums of `h - h~` for an encoded sequence.
pub fn sequence_sums(cb: &Codebook, seq: &KinemeSequence) -> Result<Vec<[f64; 3]>> {
    seq.labels
        .iter()
        .enumerate()
        .map(|(i, &label)| segment_sum(difference_vector(seq.segments.column(i), cb.kineme(label))?.view()))
        .collect()
}

/// Encodes a series and returns the features of each complete chunk.
pub fn extract_features(cb: &Codebook, series: &AngleSeries, chunk_seconds: u32) -> Result<Vec<ChunkFeatures>> {
    let ranges = chunk_boundaries(series, chunk_seconds)?;
    let seq = encode_series(cb, series)?;
    let sums = sequence_sums(cb, &seq)?;
    ranges
        .into_iter()
        .enumerate()
        .map(|(chunk_index, r)| {
            Ok(ChunkFeatures {
                video_id: series.video_id().to_string(),
                chunk_index,
                values: chunk_statistics(&sums[r])?,
            })
        })
        .collect()
}

/// Per-column z-normalisation fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normaliser {
    pub mean: Vec<f64>,
    /// Population standard deviation; columns below `1e-12` are only centred.
    pub std: Vec<f64>,
}

const MIN_STD: f64 = 1e-12;

impl Normaliser {
    pub fn apply_row(&self, row: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(row.len(), |j| {
            let c = row[j] - self.mean[j];
            if self.std[j] < MIN_STD {
                c
            } else {
                c / self.std[j]
            }
        })
    }

    /// FNV-1a over the parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.mean.iter().chain(&self.std) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

pub fn fit_normaliser(train: ArrayView2<f64>) -> Result<Normaliser> {
    let n = train.nrows();
    if n == 0 {
        return Err(Error::Contract("cannot fit a normaliser on zero rows".into()));
    }
    let mean: Vec<f64> = train.columns().into_iter().map(|c| c.sum() / n as f64).collect();
    let std = train
        .columns()
        .into_iter()
        .zip(&mean)
        .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt())
        .collect();
    Ok(Normaliser { mean, std })
}

pub fn apply_normaliser(params: &Normaliser, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
    if rows.ncols() != params.mean.len() {
        return Err(Error::Contract(format!(
            "rows have {} columns, normaliser has {}",
            rows.ncols(),
            params.mean.len()
        )));
    }
    let mut out = Array2::zeros(rows.dim());
    for (i, row) in rows.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&params.apply_row(row));
    }
    Ok(out)
}

/// One labelled chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub video_id: String,
    pub chunk_index: usize,
    pub values: [f64; FEATURE_COUNT],
    pub label: BinaryLabel,
    /// QIDS-SR equivalent severity.
    pub severity: f64,
}

/// Labelled chunk features plus the normaliser fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
    pub normaliser: Option<Normaliser>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureRow>) -> Self {
        FeatureMatrix { rows, normaliser: None }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Raw `n x 24` values.
    pub fn values(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), FEATURE_COUNT));
        for (i, r) in self.rows.iter().enumerate() {
            out.row_mut(i).assign(&ArrayView1::from(&r.values));
        }
        out
    }

    pub fn labels(&self) -> Vec<BinaryLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn severities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.severity).collect()
    }

    /// Fits the normaliser on these rows and stores it.
    pub fn fit_normaliser(&mut self) -> Result<&Normaliser> {
        let params = fit_normaliser(self.values().view())?;
        Ok(self.normaliser.insert(params))
    }

    /// Values after the stored normaliser (raw values if none is fitted).
    pub fn normalised(&self) -> Result<Array2<f64>> {
        let values = self.values();
        match &self.normaliser {
            Some(n) => apply_normaliser(n, values.view()),
            None => Ok(values),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let csv_err = |e: csv::Error| Error::format("<feature csv output>", e.to_string());
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["video_id".to_string(), "chunk_index".to_string()];
        header.extend(feature_names());
        header.push("label".into());
        header.push("severity".into());
        wtr.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.video_id.clone(), r.chunk_index.to_string()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.push(r.label.to_string());
            rec.push(r.severity.to_string());
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<feature csv output>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &std::path::Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?.clone();
        let mut expected = vec!["video_id".to_string(), "chunk_index".to_string()];
        expected.extend(feature_names());
        expected.push("label".into());
        expected.push("severity".into());
        if headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::format(origin, "unexpected feature CSV header"));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::format(origin, e.to_string()))?;
            let bad = |what: &str| Error::format(origin, format!("line {line}: bad {what}"));
            let mut values = [0.0; FEATURE_COUNT];
            for (j, v) in values.iter_mut().enumerate() {
                *v = rec[2 + j].parse().map_err(|_| bad(&expected[2 + j]))?;
            }
            rows.push(FeatureRow {
                video_id: rec[0].to_string(),
                chunk_index: rec[1].parse().map_err(|_| bad("chunk_index"))?,
                values,
                label: rec[2 + FEATURE_COUNT].parse().map_err(|_| bad("label"))?,
                severity: rec[3 + FEATURE_COUNT].parse().map_err(|_| bad("severity"))?,
            });
        }
        Ok(FeatureMatrix::new(rows))
    }
}
