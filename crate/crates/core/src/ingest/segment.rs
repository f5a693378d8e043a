use std::ops::Range;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};

use super::{AngleSeries, CANONICAL_LEN, CANONICAL_SECONDS};
use crate::error::{Error, Result};

/// Chunk durations (seconds) the feature pipeline supports.
pub const SUPPORTED_CHUNK_SECONDS: [u32; 4] = [60, 75, 90, 120];

/// Window geometry for cutting a series into overlapping segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segmentation {
    /// Samples per segment (per angle).
    pub segment_len: usize,
    /// Samples between consecutive segment starts.
    pub hop: usize,
    /// Samples per series.
    pub series_len: usize,
}

impl Default for Segmentation {
    /// 5 s windows with 2.5 s overlap on a 3000-sample series.
    fn default() -> Self {
        Segmentation {
            segment_len: 50,
            hop: 25,
            series_len: CANONICAL_LEN,
        }
    }
}

impl Segmentation {
    /// Flattened segment length `3 * segment_len`.
    pub fn dim(&self) -> usize {
        3 * self.segment_len
    }

    pub fn segment_count(&self) -> usize {
        if self.series_len < self.segment_len || self.hop == 0 {
            0
        } else {
            (self.series_len - self.segment_len) / self.hop + 1
        }
    }

    pub fn segment_start(&self, index: usize) -> usize {
        index * self.hop
    }

    /// Cuts `series` into its characterisation matrix.
    pub fn segment(&self, series: &AngleSeries) -> Result<SegmentMatrix> {
        if series.len() != self.series_len {
            return Err(Error::Contract(format!(
                "series '{}' has {} samples, segmentation expects {}",
                series.video_id(),
                series.len(),
                self.series_len
            )));
        }
        let count = self.segment_count();
        let l = self.segment_len;
        let samples = series.samples();
        let mut columns = Array2::zeros((self.dim(), count));
        for i in 0..count {
            let start = self.segment_start(i);
            let mut col = columns.column_mut(i);
            for a in 0..3 {
                col.slice_mut(s![a * l..(a + 1) * l])
                    .assign(&samples.slice(s![start..start + l, a]));
            }
        }
        Ok(SegmentMatrix {
            columns,
            video_ids: vec![series.video_id().to_string(); count],
            start_indices: (0..count).map(|i| self.segment_start(i)).collect(),
        })
    }

    /// Segment index ranges of consecutive non-overlapping chunks of
    /// `chunk_len` samples tiling the series from sample 0.
    ///
    /// A chunk owns every segment lying entirely inside it; a trailing partial
    /// chunk is dropped.
    pub fn chunk_ranges(&self, chunk_len: usize) -> Vec<Range<usize>> {
        if chunk_len == 0 {
            return Vec::new();
        }
        let n_chunks = self.series_len / chunk_len;
        let count = self.segment_count();
        (0..n_chunks)
            .map(|c| {
                let lo = c * chunk_len;
                let hi = lo + chunk_len;
                let first = lo.div_ceil(self.hop);
                let end = if hi < self.segment_len {
                    first
                } else {
                    ((hi - self.segment_len) / self.hop + 1).min(count)
                };
                first..end.max(first)
            })
            .collect()
    }
}

/// One flattened window `[pitch | yaw | roll]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start_index: usize,
    pub values: Array1<f64>,
}

/// Column-stacked segments with per-column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatrix {
    columns: Array2<f64>,
    video_ids: Vec<String>,
    start_indices: Vec<usize>,
}

impl SegmentMatrix {
    /// `m x s` matrix with one segment per column.
    pub fn columns(&self) -> &Array2<f64> {
        &self.columns
    }

    pub fn into_columns(self) -> Array2<f64> {
        self.columns
    }

    pub fn video_ids(&self) -> &[String] {
        &self.video_ids
    }

    pub fn start_indices(&self) -> &[usize] {
        &self.start_indices
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.columns.column(i)
    }

    pub fn segment(&self, i: usize) -> Segment {
        Segment {
            start_index: self.start_indices[i],
            values: self.columns.column(i).to_owned(),
        }
    }

    /// Concatenates per-video matrices side by side.
    pub fn concat(parts: &[SegmentMatrix]) -> Result<SegmentMatrix> {
        let Some(first) = parts.first() else {
            return Err(Error::Contract("cannot concatenate zero segment matrices".into()));
        };
        if parts.iter().any(|p| p.columns.nrows() != first.columns.nrows()) {
            return Err(Error::Contract("segment matrices differ in row count".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.columns.view()).collect();
        let columns = concatenate(Axis(1), &views).map_err(|e| Error::Contract(e.to_string()))?;
        Ok(SegmentMatrix {
            columns,
            video_ids: parts.iter().flat_map(|p| p.video_ids.iter().cloned()).collect(),
            start_indices: parts.iter().flat_map(|p| p.start_indices.iter().copied()).collect(),
        })
    }
}

/// Segments a canonical series with 5 s windows and 2.5 s hop.
pub fn segment_series(series: &AngleSeries) -> Result<SegmentMatrix> {
    Segmentation::default().segment(series)
}

/// Segment ranges for non-overlapping chunks of `chunk_seconds`.
pub fn chunk_boundaries(series: &AngleSeries, chunk_seconds: u32) -> Result<Vec<Range<usize>>> {
    if !SUPPORTED_CHUNK_SECONDS.contains(&chunk_seconds) {
        return Err(Error::Config(format!(
            "unsupported chunk size {chunk_seconds} s (supported: 60, 75, 90, 120)"
        )));
    }
    if !series.is_canonical() {
        return Err(Error::Contract(format!(
            "series '{}' is not canonical ({} samples)",
            series.video_id(),
            series.len()
        )));
    }
    Ok(Segmentation::default().chunk_ranges(chunk_len_samples(chunk_seconds)))
}

/// Chunk length in samples on the nominal canonical time grid.
pub(crate) fn chunk_len_samples(chunk_seconds: u32) -> usize {
    let per_second = CANONICAL_LEN as f64 / CANONICAL_SECONDS;
    (chunk_seconds as f64 * per_second).round() as usize
}
