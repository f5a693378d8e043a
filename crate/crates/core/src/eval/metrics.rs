use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BinaryLabel;

const CLASSES: [BinaryLabel; 2] = [BinaryLabel::Low, BinaryLabel::High];

/// Accuracy and support-weighted precision, recall and F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
}

/// Per-class scores are 0 when their denominator is 0. Each class is
/// weighted by `support / n`, low class first.
pub fn classification_metrics(truth: &[BinaryLabel], pred: &[BinaryLabel]) -> Result<ClassificationMetrics> {
    check_lengths(truth.len(), pred.len())?;
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for c in CLASSES {
        let support = truth.iter().filter(|&&t| t == c).count();
        let predicted = pred.iter().filter(|&&p| p == c).count();
        let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count();
        let p = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let r = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let w = support as f64 / n;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
    }
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / n,
        f1,
        precision,
        recall,
    })
}

pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(truth.len(), pred.len())?;
    let n = truth.len() as f64;
    let (abs, sq) = truth.iter().zip(pred).fold((0.0, 0.0), |(a, s), (t, p)| {
        let e = p - t;
        (a + e.abs(), s + e * e)
    });
    Ok(RegressionMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    })
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} true values but {b} predictions")));
    }
    if a == 0 {
        return Err(Error::Shape("no predictions to score".into()));
    }
    Ok(())
}

/// Mean and sample standard deviation over runs (std 0 for a single run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
                runs: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, std, runs: n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use BinaryLabel::{High as H, Low as L};

    #[test]
    fn perfect() {
        let y = [H, L, L, H, H];
        let m = classification_metrics(&y, &y).unwrap();
        assert_eq!((m.accuracy, m.f1, m.precision, m.recall), (1.0, 1.0, 1.0, 1.0));
        let r = regression_metrics(&[1.0, 5.0], &[1.0, 5.0]).unwrap();
        assert_eq!((r.mae, r.rmse), (0.0, 0.0));
    }

    #[test]
    fn hand_computed_confusion() {
        let m = classification_metrics(&[H, H, L, L], &[H, L, L, L]).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_abs_diff_eq!(m.f1, 0.5 * (2.0 / 3.0) + 0.5 * (4.0 / 5.0), epsilon = 1e-15);
        assert_abs_diff_eq!(m.f1, 0.7333, epsilon = 1e-4);
        // precision: low 2/3, high 1; recall: low 1, high 1/2
        assert_abs_diff_eq!(m.precision, 0.5 * (2.0 / 3.0) + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.recall, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn errors_and_degenerate() {
        let r = regression_metrics(&[0.0, 0.0], &[3.0, -4.0]).unwrap();
        assert_eq!(r.mae, 3.5);
        assert_abs_diff_eq!(r.rmse, 12.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.rmse, 3.5355, epsilon = 1e-4);
        assert!(regression_metrics(&[1.0], &[]).is_err());
        assert!(classification_metrics(&[], &[]).is_err());
        let m = classification_metrics(&[H, H], &[L, L]).unwrap();
        assert_eq!((m.accuracy, m.f1, m.precision, m.recall), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn summary() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.std, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(Summary::of(&[7.0]).std, 0.0);
    }
}
