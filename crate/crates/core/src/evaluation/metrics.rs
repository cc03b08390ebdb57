use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Binary confusion counts; positive is the patient class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

/// Accuracy, sensitivity and specificity; a ratio with a zero denominator
/// is `None` rather than 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::input(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
        }
    }

    /// Positives evaluated, `TP + FN`.
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    /// Negatives evaluated, `TN + FP`.
    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn total(&self) -> usize {
        self.positives() + self.negatives()
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    Metrics {
        accuracy: ratio(cm.correct(), cm.total()),
        sensitivity: ratio(cm.tp, cm.positives()),
        specificity: ratio(cm.tn, cm.negatives()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: usize, fn_: usize, tn: usize, fp: usize) -> ConfusionMatrix {
        ConfusionMatrix { tp, fn_, tn, fp }
    }

    #[test]
    fn definitions() {
        let m = metrics(&cm(30, 10, 40, 20));
        assert_eq!(m.accuracy, Some(0.7));
        assert_eq!(m.sensitivity, Some(0.75));
        assert!((m.specificity.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let perfect = metrics(&cm(5, 0, 7, 0));
        assert_eq!(
            (perfect.accuracy, perfect.sensitivity, perfect.specificity),
            (Some(1.0), Some(1.0), Some(1.0))
        );
        let all_pos = metrics(&cm(10, 0, 0, 10));
        assert_eq!(
            (all_pos.accuracy, all_pos.sensitivity, all_pos.specificity),
            (Some(0.5), Some(1.0), Some(0.0))
        );
    }

    #[test]
    fn missing_class_is_undefined() {
        let m = metrics(&cm(3, 1, 0, 0));
        assert_eq!(m.specificity, None);
        assert_eq!(m.sensitivity, Some(0.75));
        assert_eq!(metrics(&ConfusionMatrix::default()).accuracy, None);
    }

    #[test]
    fn from_predictions_counts() {
        use Label::{Negative as N, Positive as P};
        let c = ConfusionMatrix::from_predictions(&[P, P, N, N, N], &[P, N, N, P, N]).unwrap();
        assert_eq!(c, cm(1, 1, 2, 1));
        assert!(ConfusionMatrix::from_predictions(&[P], &[]).is_err());
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"tp":1,"fn":1,"tn":2,"fp":1}"#);
    }

    /// `acc·(P+N) = sen·P + spe·N` reduces to `TP + TN = TP + TN` in
    /// integers; check it through the exact rationals.
    #[test]
    fn accuracy_identity_exhaustive() {
        for p in 1..=12usize {
            for n in 1..=12usize {
                for tp in 0..=p {
                    for tn in 0..=n {
                        let c = cm(tp, p - tp, tn, n - tn);
                        let m = metrics(&c);
                        // Each ratio times its denominator recovers the integer count.
                        assert_eq!((m.sensitivity.unwrap() * p as f64).round() as usize, tp);
                        assert_eq!((m.specificity.unwrap() * n as f64).round() as usize, tn);
                        assert_eq!(
                            (m.accuracy.unwrap() * (p + n) as f64).round() as usize,
                            tp + tn
                        );
                    }
                }
            }
        }
    }

    /// With N_pos = 20, N_neg = 25 and TP + TN fixed, `sen − spe` rises
    /// strictly with TP.
    #[test]
    fn sensitivity_minus_specificity_increases_with_tp() {
        let (p, n) = (20usize, 25usize);
        for correct in 0..=(p + n) {
            let mut prev: Option<(i64, i64)> = None;
            for tp in 0..=p {
                if correct < tp || correct - tp > n {
                    continue;
                }
                let tn = correct - tp;
                // sen − spe = tp/p − tn/n as the exact fraction (tp·n − tn·p) / (p·n).
                let num = (tp * n) as i64 - (tn * p) as i64;
                if let Some((_, prev_num)) = prev {
                    assert!(num > prev_num);
                }
                let m = metrics(&cm(tp, p - tp, tn, n - tn));
                let d = m.sensitivity.unwrap() - m.specificity.unwrap();
                assert!((d - num as f64 / (p * n) as f64).abs() < 1e-15);
                prev = Some((tp as i64, num));
            }
        }
    }
}
