use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

/// Positive-class probability of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub subject_id: String,
    pub score: f64,
    pub label: Label,
}

impl ScoredPrediction {
    /// Argmax of the two-way softmax: positive only when the positive
    /// probability is strictly larger.
    pub fn predicted(&self) -> Label {
        if self.score > 0.5 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn from_predictions(preds: &[ScoredPrediction]) -> Self {
        let mut cm = Self::default();
        for p in preds {
            match (p.label, p.predicted()) {
                (Label::Positive, Label::Positive) => cm.tp += 1,
                (Label::Positive, Label::Negative) => cm.fn_ += 1,
                (Label::Negative, Label::Positive) => cm.fp += 1,
                (Label::Negative, Label::Negative) => cm.tn += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let sensitivity = ratio(self.tp, self.tp + self.fn_);
        let precision = ratio(self.tp, self.tp + self.fp);
        let f1 = match (sensitivity, precision) {
            (Some(s), Some(p)) if s + p > 0.0 => Some(2.0 * s * p / (s + p)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Metrics {
            sensitivity,
            specificity: ratio(self.tn, self.tn + self.fp),
            precision,
            f1,
            accuracy: ratio(self.tp + self.tn, self.total()),
        }
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fn_ + o.fn_, self.fp + o.fp, self.tn + o.tn)
    }
}

/// Threshold metrics as fractions; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Elementwise sum of per-fold matrices.
pub fn cumulative_confusion(folds: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    if folds.is_empty() {
        return Err(Error::Data("no fold results to accumulate".into()));
    }
    Ok(folds.iter().copied().fold(ConfusionMatrix::default(), |a, b| a + b))
}

/// A percentage rounded to two decimals, or the token `"undefined"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Percent {
    Value(f64),
    Undefined(Undefined),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Undefined {
    Undefined,
}

impl Percent {
    pub fn of(fraction: Option<f64>) -> Self {
        match fraction {
            Some(f) => Percent::Value(round_to(f * 100.0, 2)),
            None => Percent::Undefined(Undefined::Undefined),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Percent::Value(v) => Some(v),
            Percent::Undefined(_) => None,
        }
    }
}

pub(crate) fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// The metrics JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Percent,
    pub specificity: Percent,
    pub precision: Percent,
    pub f1: Percent,
    pub accuracy: Percent,
    /// Area under the ROC curve as a fraction, four decimals.
    pub auc: Option<f64>,
    pub counts: ConfusionMatrix,
}

impl MetricsReport {
    pub fn new(cm: ConfusionMatrix, auc: Option<f64>) -> Self {
        let m = cm.metrics();
        Self {
            sensitivity: Percent::of(m.sensitivity),
            specificity: Percent::of(m.specificity),
            precision: Percent::of(m.precision),
            f1: Percent::of(m.f1),
            accuracy: Percent::of(m.accuracy),
            auc: auc.map(|a| round_to(a, 4)),
            counts: cm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undefined_metrics() {
        let m = ConfusionMatrix::default().metrics();
        assert_eq!(m.accuracy, None);
        assert_eq!(m.sensitivity, None);
        let only_neg = ConfusionMatrix::new(0, 0, 1, 3).metrics();
        assert_eq!(only_neg.sensitivity, None);
        assert_eq!(only_neg.precision, Some(0.0));
        assert_eq!(only_neg.f1, None);
        assert_eq!(only_neg.specificity, Some(0.75));
    }

    #[test]
    fn report_json_tokens() {
        let r = MetricsReport::new(ConfusionMatrix::new(0, 0, 0, 2), None);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["sensitivity"], "undefined");
        assert_eq!(json["specificity"], 100.0);
        assert_eq!(json["counts"]["fn"], 0);
        let back: MetricsReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }
}
