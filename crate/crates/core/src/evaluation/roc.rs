use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub fpr: f64,
    pub fnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve from a threshold sweep over the distinct scores in descending
/// order, with the trapezoid AUC. Tied scores move both rates in one
/// segment, so the AUC counts ties as half.
pub fn roc_and_auc(scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::input("scores must not be NaN"));
    }
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::input("ROC analysis needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc2 = 0.0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        // Twice the trapezoid area in count units.
        auc2 += ((fp - fp0) * (tp + tp0)) as f64;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve {
        points,
        auc: auc2 / (2.0 * pos as f64 * neg as f64),
    })
}

/// DET points of the same sweep: `FNR = 1 − TPR`.
pub fn det_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<DetPoint>> {
    Ok(roc_to_det(&roc_and_auc(scores, labels)?.points))
}

pub fn roc_to_det(points: &[RocPoint]) -> Vec<DetPoint> {
    points
        .iter()
        .map(|p| DetPoint {
            fpr: p.fpr,
            fnr: 1.0 - p.tpr,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn perfect_and_constant_scores() {
        let labels = [P, P, N, N];
        let r = roc_and_auc(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap();
        assert_eq!(r.auc, 1.0);
        let det = det_curve(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap();
        assert!(det.contains(&DetPoint { fpr: 0.0, fnr: 0.0 }));
        let r = roc_and_auc(&[0.5; 4], &labels).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points.len(), 2);
        assert_eq!(
            roc_and_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap().auc,
            0.0
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(roc_and_auc(&[0.1, 0.2], &[P, P]).is_err());
        assert!(roc_and_auc(&[0.1], &[P, N]).is_err());
        assert!(roc_and_auc(&[f64::NAN, 0.2], &[P, N]).is_err());
    }

    #[test]
    fn det_mirrors_roc() {
        let scores = [0.3, 0.7, 0.7, 0.1, 0.9, 0.4];
        let labels = [P, N, P, N, P, N];
        let roc = roc_and_auc(&scores, &labels).unwrap();
        let det = det_curve(&scores, &labels).unwrap();
        for (r, d) in roc.points.iter().zip(&det) {
            assert_eq!(r.fpr, d.fpr);
            assert_eq!(d.fnr, 1.0 - r.tpr);
        }
        assert_eq!(det.first().unwrap().fpr, 0.0);
        assert_eq!(det.last().unwrap().fpr, 1.0);
    }
}
