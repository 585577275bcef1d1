//! Scoring predictions against annotations.
//!
//! Categorical properties are scored by exact match on canonical labels
//! (case-insensitive). Numeric properties use the relative error ratio
//! `e = |pred - gt| / gt` and count a prediction as correct when `e` is
//! strictly below the threshold. Ratios and comparisons are computed exactly
//! on the shortest decimal form of each number, so `(1.05, 1.0)` has ratio
//! exactly `0.05` and is not below a `0.05` threshold. Absent or unparseable
//! predictions count as incorrect; they are never dropped from denominators.

mod annotations;
mod benchmark;

pub use annotations::{load_annotations, parse_annotations, AnnotationRecord, ANNOTATED_PROPERTIES};
pub use benchmark::{default_columns, run_benchmark, BenchmarkRun, Cell, Column, MetricsRow, MetricsTable, ScoredPrediction};

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::PropertyValue;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no pairs to score")]
    EmptyPairs,
    #[error("threshold {0} must be positive and finite")]
    InvalidThreshold(f64),
    #[error("ground truth {0} must be positive and finite")]
    NonPositiveTruth(f64),
    #[error("property {0:?} has a non-numeric ground truth")]
    NotNumeric(String),
    #[error("property {0:?} has a numeric ground truth")]
    NotCategorical(String),
    #[error("{location}: {message}")]
    Annotation { location: String, message: String },
}

/// A percentage with two decimals, stored as hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(u32);

impl Percent {
    /// `100 * correct / total`, rounded half-up to two decimals.
    pub fn from_counts(correct: usize, total: usize) -> Option<Self> {
        if total == 0 || correct > total {
            return None;
        }
        let (c, t) = (correct as u128, total as u128);
        Some(Percent(((2 * c * 10_000 + t) / (2 * t)) as u32))
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        // Parsing the decimal text gives the nearest double to the printed value.
        self.to_string().parse().expect("percent text is a number")
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percentage {v} out of range")));
        }
        Ok(Percent((v * 100.0).round() as u32))
    }
}

/// Exact rational value of the shortest decimal that round-trips to `x`.
fn decimal(x: f64) -> BigRational {
    debug_assert!(x.is_finite());
    let text = format!("{x}");
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let numer: BigInt = format!("{int_part}{frac_part}").parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = BigRational::new(numer, denom);
    if negative {
        -value
    } else {
        value
    }
}

fn check_truth(v_gt: f64) -> Result<(), EvalError> {
    if v_gt.is_finite() && v_gt > 0.0 {
        Ok(())
    } else {
        Err(EvalError::NonPositiveTruth(v_gt))
    }
}

/// Exact `|pred - gt| / gt`; `None` when the prediction is not finite.
pub fn error_ratio_exact(v_pred: f64, v_gt: f64) -> Result<Option<BigRational>, EvalError> {
    check_truth(v_gt)?;
    if !v_pred.is_finite() {
        return Ok(None);
    }
    let gt = decimal(v_gt);
    Ok(Some((decimal(v_pred) - &gt).abs() / gt))
}

/// `|pred - gt| / gt` rounded to the nearest double; infinite for non-finite predictions.
pub fn error_ratio(v_pred: f64, v_gt: f64) -> Result<f64, EvalError> {
    Ok(match error_ratio_exact(v_pred, v_gt)? {
        Some(e) if e.is_zero() => 0.0,
        Some(e) => e.to_f64().unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    })
}

/// Error ratio of a typed prediction; absent and non-numeric predictions are infinitely wrong.
pub fn prediction_error(predicted: &PropertyValue, v_gt: f64) -> Result<f64, EvalError> {
    match predicted.as_f64() {
        Some(v) => error_ratio(v, v_gt),
        None => {
            check_truth(v_gt)?;
            Ok(f64::INFINITY)
        }
    }
}

/// Ground-truth value of one annotated property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truth {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub property: String,
    pub predicted: PropertyValue,
    pub truth: Truth,
}

/// Per-cell bookkeeping: `correct + incorrect + absent` is the denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub correct: usize,
    pub incorrect: usize,
    pub absent: usize,
}

impl CellStats {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.absent
    }

    pub fn percent(&self) -> Option<Percent> {
        Percent::from_counts(self.correct, self.total())
    }

    fn add(&mut self, predicted: &PropertyValue, correct: bool) {
        if correct {
            self.correct += 1;
        } else if predicted.is_absent() {
            self.absent += 1;
        } else {
            self.incorrect += 1;
        }
    }
}

fn check_threshold(threshold: f64) -> Result<BigRational, EvalError> {
    if threshold.is_finite() && threshold > 0.0 {
        Ok(decimal(threshold))
    } else {
        Err(EvalError::InvalidThreshold(threshold))
    }
}

/// Counts numeric predictions whose error ratio is strictly below `threshold`.
pub fn score_numeric(threshold: f64, pairs: &[EvalPair]) -> Result<CellStats, EvalError> {
    let t = check_threshold(threshold)?;
    let mut stats = CellStats::default();
    for pair in pairs {
        let Truth::Number(gt) = pair.truth else {
            return Err(EvalError::NotNumeric(pair.property.clone()));
        };
        let correct = match pair.predicted.as_f64() {
            Some(v) => error_ratio_exact(v, gt)?.is_some_and(|e| e < t),
            None => {
                check_truth(gt)?;
                false
            }
        };
        stats.add(&pair.predicted, correct);
    }
    Ok(stats)
}

/// Counts categorical predictions equal to the ground truth, ignoring case.
pub fn score_categorical(pairs: &[EvalPair]) -> Result<CellStats, EvalError> {
    let mut stats = CellStats::default();
    for pair in pairs {
        let Truth::Label(gt) = &pair.truth else {
            return Err(EvalError::NotCategorical(pair.property.clone()));
        };
        let correct = pair
            .predicted
            .as_label()
            .is_some_and(|p| p.trim().to_lowercase() == gt.trim().to_lowercase());
        stats.add(&pair.predicted, correct);
    }
    Ok(stats)
}

/// Percentage of pairs with error ratio strictly below `threshold`.
pub fn accuracy_at(threshold: f64, pairs: &[EvalPair]) -> Result<Percent, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    Ok(score_numeric(threshold, pairs)?.percent().expect("non-empty"))
}

/// Percentage of exact (case-insensitive) label matches.
pub fn categorical_accuracy(pairs: &[EvalPair]) -> Result<Percent, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    Ok(score_categorical(pairs)?.percent().expect("non-empty"))
}
