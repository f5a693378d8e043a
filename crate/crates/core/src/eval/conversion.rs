//! Raw BDI / HRSD scores to QIDS-SR equivalents.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Scale;

pub const QIDS_MAX: u32 = 27;

const BDI_TABLE: &str = include_str!("../../data/bdi_to_qids.csv");
const HRSD_TABLE: &str = include_str!("../../data/hrsd_to_qids.csv");

/// A total, monotone map from every raw score of a scale to QIDS-SR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionTable {
    scale: Scale,
    mapping: Vec<u32>,
}

impl ConversionTable {
    pub fn new(scale: Scale, mapping: Vec<u32>) -> Result<Self> {
        let expected = scale.max_score() as usize + 1;
        if mapping.len() != expected {
            return Err(Error::Config(format!(
                "{scale} table covers {} raw scores, expected 0..={}",
                mapping.len(),
                scale.max_score()
            )));
        }
        if let Some(v) = mapping.iter().find(|&&q| q > QIDS_MAX) {
            return Err(Error::Config(format!(
                "{scale} table maps to {v}, above QIDS-SR maximum {QIDS_MAX}"
            )));
        }
        if let Some(i) = mapping.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Config(format!("{scale} table decreases at raw score {}", i + 1)));
        }
        Ok(ConversionTable { scale, mapping })
    }

    /// The shipped table for BDI or HRSD; QIDS-SR maps to itself.
    pub fn shipped(scale: Scale) -> Self {
        let table = match scale {
            Scale::Bdi => BDI_TABLE,
            Scale::Hrsd => HRSD_TABLE,
            Scale::QidsSr => return ConversionTable::identity(),
        };
        ConversionTable::from_reader(scale, table.as_bytes(), Path::new("<shipped table>"))
            .expect("shipped table is valid")
    }

    pub fn identity() -> Self {
        ConversionTable {
            scale: Scale::QidsSr,
            mapping: (0..=QIDS_MAX).collect(),
        }
    }

    /// Reads a two-column `raw,qids` CSV; rows may come in any order but
    /// must cover each raw score exactly once.
    pub fn from_reader<R: Read>(scale: Scale, reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::format(origin, e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["raw", "qids"] {
            return Err(Error::format(origin, "conversion table header must be 'raw,qids'"));
        }
        let size = scale.max_score() as usize + 1;
        let mut mapping: Vec<Option<u32>> = vec![None; size];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::format(origin, e.to_string()))?;
            let parse = |j: usize| -> Result<u32> {
                rec.get(j)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::format(origin, format!("line {line}: expected two non-negative integers")))
            };
            let (raw, qids) = (parse(0)? as usize, parse(1)?);
            match mapping.get_mut(raw) {
                None => {
                    return Err(Error::format(
                        origin,
                        format!("line {line}: raw score {raw} outside {scale} range"),
                    ))
                }
                Some(Some(_)) => {
                    return Err(Error::format(
                        origin,
                        format!("line {line}: raw score {raw} listed twice"),
                    ))
                }
                Some(slot) => *slot = Some(qids),
            }
        }
        let mapping = mapping
            .into_iter()
            .enumerate()
            .map(|(raw, q)| q.ok_or_else(|| Error::format(origin, format!("raw score {raw} missing"))))
            .collect::<Result<Vec<_>>>()?;
        ConversionTable::new(scale, mapping)
    }

    pub fn load(scale: Scale, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ConversionTable::from_reader(scale, file, path)
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn mapping(&self) -> &[u32] {
        &self.mapping
    }
}

pub fn convert_severity(table: &ConversionTable, raw: u32) -> Result<u32> {
    table.mapping.get(raw as usize).copied().ok_or_else(|| {
        Error::Config(format!(
            "raw {} score {raw} outside table domain 0..={}",
            table.scale,
            table.mapping.len() - 1
        ))
    })
}

/// One table per scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversions {
    pub bdi: ConversionTable,
    pub hrsd: ConversionTable,
}

impl Default for Conversions {
    fn default() -> Self {
        Conversions {
            bdi: ConversionTable::shipped(Scale::Bdi),
            hrsd: ConversionTable::shipped(Scale::Hrsd),
        }
    }
}

impl Conversions {
    pub fn to_qids(&self, scale: Scale, raw: u32) -> Result<u32> {
        match scale {
            Scale::Bdi => convert_severity(&self.bdi, raw),
            Scale::Hrsd => convert_severity(&self.hrsd, raw),
            Scale::QidsSr if raw <= QIDS_MAX => Ok(raw),
            Scale::QidsSr => Err(Error::Config(format!("QIDS-SR score {raw} above {QIDS_MAX}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Band = ((u32, u32), (u32, u32));

    /// Integer round-half-up interpolation within severity bands.
    fn banded(bands: &[Band], raw: u32) -> u32 {
        let ((r0, r1), (q0, q1)) = *bands.iter().find(|((a, b), _)| (*a..=*b).contains(&raw)).unwrap();
        q0 + (2 * (raw - r0) * (q1 - q0) + (r1 - r0)) / (2 * (r1 - r0))
    }

    #[test]
    fn shipped_tables_match_band_transcription() {
        let bdi = [
            ((0, 13), (0, 5)),
            ((14, 19), (6, 10)),
            ((20, 28), (11, 15)),
            ((29, 63), (16, 27)),
        ];
        let hrsd = [
            ((0, 7), (0, 5)),
            ((8, 13), (6, 10)),
            ((14, 19), (11, 15)),
            ((20, 25), (16, 20)),
            ((26, 52), (21, 27)),
        ];
        let c = Conversions::default();
        for raw in 0..=63 {
            assert_eq!(c.to_qids(Scale::Bdi, raw).unwrap(), banded(&bdi, raw), "BDI {raw}");
        }
        for raw in 0..=52 {
            assert_eq!(c.to_qids(Scale::Hrsd, raw).unwrap(), banded(&hrsd, raw), "HRSD {raw}");
        }
        assert_eq!(c.to_qids(Scale::Bdi, 20).unwrap(), 11);
        assert_eq!(c.to_qids(Scale::Bdi, 63).unwrap(), 27);
    }

    #[test]
    fn anchors_and_passthrough() {
        let c = Conversions::default();
        assert_eq!(c.to_qids(Scale::QidsSr, 9).unwrap(), 9);
        assert_eq!(c.to_qids(Scale::Bdi, 0).unwrap(), 0);
        assert_eq!(c.to_qids(Scale::Hrsd, 0).unwrap(), 0);
        // Binary thresholds land on the QIDS "none" band edge.
        assert_eq!(c.to_qids(Scale::Bdi, 13).unwrap(), 5);
        assert_eq!(c.to_qids(Scale::Hrsd, 7).unwrap(), 5);
        assert!(c.to_qids(Scale::Bdi, 64).is_err());
        assert!(c.to_qids(Scale::QidsSr, 28).is_err());
    }

    #[test]
    fn rejects_bad_tables() {
        let p = Path::new("t.csv");
        assert!(ConversionTable::from_reader(Scale::Hrsd, "a,b\n0,0\n".as_bytes(), p).is_err());
        let mut text = String::from("raw,qids\n");
        for r in 0..=52 {
            text.push_str(&format!("{r},{}\n", if r == 10 { 0 } else { r / 2 }));
        }
        assert!(matches!(
            ConversionTable::from_reader(Scale::Hrsd, text.as_bytes(), p),
            Err(Error::Config(_))
        ));
        let short = "raw,qids\n0,0\n1,1\n";
        assert!(ConversionTable::from_reader(Scale::Hrsd, short.as_bytes(), p).is_err());
        let reordered: String = std::iter::once("raw,qids\n".to_string())
            .chain((0..=52).rev().map(|r| format!("{r},{}\n", r / 2)))
            .collect();
        let t = ConversionTable::from_reader(Scale::Hrsd, reordered.as_bytes(), p).unwrap();
        assert_eq!(t.mapping()[52], 26);
    }
}
