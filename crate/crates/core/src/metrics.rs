//! Figures of merit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean squared error over the (population) variance of the target.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nmse(pub f64);

impl Nmse {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn nmse(predicted: &[f64], target: &[f64]) -> Result<Nmse> {
    if predicted.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "NMSE prediction length",
            expected: target.len(),
            got: predicted.len(),
        });
    }
    if target.len() < 2 {
        return Err(Error::InvalidParameter("NMSE needs at least two samples".into()));
    }
    let mean = target.iter().sum::<f64>() / target.len() as f64;
    // both sums carry the same 1/K, so it cancels; dividing the raw sums
    // keeps the mean predictor at exactly 1
    let spread = target.iter().map(|t| (t - mean).powi(2)).sum::<f64>();
    if !(spread > 0.0) {
        return Err(Error::UndefinedVariance);
    }
    let sq_err = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>();
    Ok(Nmse(sq_err / spread))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRate {
    pub value: f64,
    pub n_correct: usize,
    pub n_total: usize,
}

impl ErrorRate {
    pub fn from_counts(n_correct: usize, n_total: usize) -> Self {
        Self {
            value: 1.0 - n_correct as f64 / n_total as f64,
            n_correct,
            n_total,
        }
    }
}

/// Fraction of mismatched class predictions.
pub fn error_rate(predictions: &[usize], labels: &[usize]) -> Result<ErrorRate> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "error rate prediction count",
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(ErrorRate::from_counts(correct, labels.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_examples() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(nmse(&t, &t).unwrap().value(), 0.0);
        assert_eq!(nmse(&[1.0; 3], &t).unwrap().value(), 1.0);
        assert_eq!(nmse(&[0.0; 3], &t).unwrap().value(), 2.5);
    }

    #[test]
    fn nmse_errors() {
        assert!(matches!(nmse(&[0.0; 3], &[1.0; 3]), Err(Error::UndefinedVariance)));
        assert!(nmse(&[0.0; 2], &[1.0, 2.0, 3.0]).is_err());
        assert!(nmse(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn error_rate_examples() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        assert_eq!(error_rate(&labels, &labels).unwrap().value, 0.0);
        let wrong: Vec<usize> = labels.iter().map(|l| (l + 1) % 3).collect();
        assert_eq!(error_rate(&wrong, &labels).unwrap().value, 1.0);
        let mut one_off = labels.clone();
        one_off[17] = (one_off[17] + 1) % 3;
        let e = error_rate(&one_off, &labels).unwrap();
        assert!((e.value - 0.02).abs() < 1e-15);
        assert_eq!((e.n_correct, e.n_total), (49, 50));
        assert!(error_rate(&[0, 1], &[0]).is_err());
        assert!(error_rate(&[], &[]).is_err());
    }
}
