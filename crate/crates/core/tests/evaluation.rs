use std::collections::BTreeMap;
use std::sync::Mutex;

use fcnet::data::{synth_features, ClassCounts, FeatureMatrix, Label, SyntheticSpec};
use fcnet::evaluation::{
    compare_feature_selection, det_curve, kfold_plan, linear_baseline, roc_and_auc, run_cv,
    run_cv_observed, welch_ttest, ConfusionMatrix, CvObserver, CvOptions,
};
use fcnet::feature_selection::SelectionMethod;
use fcnet::network::{predict_with_threshold_moving, NEGATIVE, POSITIVE};
use fcnet::seeds;
use fcnet::training::{SelectionConfig, TrainingConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn labels_from(bits: &[bool]) -> Vec<Label> {
    bits.iter()
        .map(|&b| if b { Label::Positive } else { Label::Negative })
        .collect()
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
fn mann_whitney_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (sp, lp) in scores.iter().zip(labels) {
        for (sn, ln) in scores.iter().zip(labels) {
            if lp.is_positive() && !ln.is_positive() {
                pairs += 1.0;
                wins += if sp > sn {
                    1.0
                } else if sp == sn {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count(
        data in prop::collection::vec((0u8..12, any::<bool>()), 2..60)
    ) {
        let mut bits: Vec<bool> = data.iter().map(|d| d.1).collect();
        bits[0] = true;
        bits[1] = false;
        let labels = labels_from(&bits);
        // Coarse scores force ties.
        let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 11.0).collect();
        let roc = roc_and_auc(&scores, &labels).unwrap();
        prop_assert!((roc.auc - mann_whitney_auc(&scores, &labels)).abs() < 1e-12);

        let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        let rev = roc_and_auc(&flipped, &labels).unwrap();
        prop_assert!((rev.auc - (1.0 - roc.auc)).abs() < 1e-12);

        let p = &roc.points;
        prop_assert_eq!((p[0].fpr, p[0].tpr), (0.0, 0.0));
        prop_assert_eq!((p[p.len() - 1].fpr, p[p.len() - 1].tpr), (1.0, 1.0));
        prop_assert!(p.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));

        let det = det_curve(&scores, &labels).unwrap();
        prop_assert!(det.iter().zip(p).all(|(d, r)| d.fpr == r.fpr && d.fnr == 1.0 - r.tpr));
    }

    #[test]
    fn welch_matches_reference_distribution(
        a in prop::collection::vec(-50.0f64..50.0, 3..25),
        b in prop::collection::vec(-50.0f64..50.0, 3..25),
    ) {
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        prop_assume!(var(&a) > 1e-6 && var(&b) > 1e-6);
        let w = welch_ttest(&a, &b).unwrap();
        let (va, vb) = (var(&a) / a.len() as f64, var(&b) / b.len() as f64);
        let df = (va + vb).powi(2)
            / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
        prop_assert!((w.df - df).abs() < 1e-9 * df);
        let reference = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-w.t.abs());
        prop_assert!((w.p - reference).abs() < 1e-9, "{} vs {}", w.p, reference);
    }
}

#[test]
fn threshold_moving_favours_the_minority_class() {
    let counts = ClassCounts {
        positive: 505,
        negative: 530,
    };
    let mut p = [0.0; 2];
    p[POSITIVE] = 0.49;
    p[NEGATIVE] = 0.51;
    assert_eq!(
        predict_with_threshold_moving(p, counts).unwrap(),
        Label::Positive
    );
    p[POSITIVE] = 0.48;
    p[NEGATIVE] = 0.52;
    assert_eq!(
        predict_with_threshold_moving(p, counts).unwrap(),
        Label::Negative
    );
}

#[test]
fn baseline_separates_and_does_not_invent_signal() {
    let fm = synth_features(&SyntheticSpec::new(5, 5, 4.0, 50, 1)).unwrap();
    let predicted = linear_baseline(&fm, &fm).unwrap();
    assert_eq!(predicted, fm.labels());

    let noise = synth_features(&SyntheticSpec::new(20, 0, 0.0, 500, 2)).unwrap();
    let mut labels = noise.labels().to_vec();
    labels.shuffle(&mut seeds::rng(3));
    let noise = FeatureMatrix::new(noise.values().clone(), labels).unwrap();
    let mut rows: Vec<usize> = (0..1000).collect();
    rows.shuffle(&mut seeds::rng(4));
    let (train, test) = (
        noise.select_rows(&rows[..500]),
        noise.select_rows(&rows[500..]),
    );
    let predicted = linear_baseline(&train, &test).unwrap();
    let acc = ConfusionMatrix::from_predictions(test.labels(), &predicted)
        .unwrap()
        .metrics()
        .accuracy
        .unwrap();
    assert!((acc - 0.5).abs() <= 0.1, "{acc}");
}

fn cv_config() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        max_training_epoch: 15,
        pretrain_epochs: Some(3),
        early_stop_patience: 5,
        hidden_widths: [8, 4],
        selection: SelectionConfig {
            method: SelectionMethod::Dsdc,
            threshold: None,
            top_k: Some(10),
        },
        ..TrainingConfig::default()
    }
}

#[derive(Default)]
struct Recorder(Mutex<BTreeMap<(usize, usize), Vec<usize>>>);

impl CvObserver for Recorder {
    fn selection_rows(&self, repeat: usize, fold: usize, rows: &[usize]) {
        self.0.lock().unwrap().insert((repeat, fold), rows.to_vec());
    }
}

#[test]
fn cv_never_selects_features_on_test_rows() {
    let fm = synth_features(&SyntheticSpec::new(40, 4, 1.0, 30, 5)).unwrap();
    let opts = CvOptions {
        repeats: 2,
        folds: 3,
        pretrain: true,
    };
    let recorder = Recorder::default();
    let report = run_cv_observed(&fm, &cv_config(), opts, 5, &recorder).unwrap();
    let seen = recorder.0.into_inner().unwrap();
    assert_eq!(seen.len(), 6);
    let plan = kfold_plan(fm.labels(), 3, 2, 5).unwrap();
    for f in &report.folds {
        let rows = &seen[&(f.repeat, f.fold)];
        assert!(f.test_indices.iter().all(|t| !rows.contains(t)));
        let mut expected = plan.folds[f.repeat][f.fold].train.clone();
        expected.sort_unstable();
        let mut got = rows.clone();
        got.sort_unstable();
        assert_eq!(got, expected);
    }
}

#[test]
fn cv_is_deterministic_apart_from_timings() {
    let fm = synth_features(&SyntheticSpec::new(30, 3, 1.0, 20, 6)).unwrap();
    let opts = CvOptions {
        repeats: 1,
        folds: 2,
        pretrain: false,
    };
    let a = run_cv(&fm, &cv_config(), opts, 6)
        .unwrap()
        .without_timings();
    let b = run_cv(&fm, &cv_config(), opts, 6)
        .unwrap()
        .without_timings();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.folds.len(), 2);
    let covered: usize = a.folds.iter().map(|f| f.test_indices.len()).sum();
    assert_eq!(covered, fm.rows());
    assert_eq!(a.folds_csv().lines().count(), 3);
}

#[test]
fn comparison_grid_shapes_and_limits() {
    let fm = synth_features(&SyntheticSpec::new(25, 3, 1.5, 30, 7)).unwrap();
    let single = compare_feature_selection(&fm, &[SelectionMethod::Dsdc], &[5], 3, 7).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert_eq!(single.rows[0].fold_accuracies.len(), 3);

    // Keeping every feature makes the ranking irrelevant.
    let all = compare_feature_selection(&fm, &SelectionMethod::ALL, &[25], 3, 7).unwrap();
    let first = &all.rows[0];
    assert!(all
        .rows
        .iter()
        .all(|r| r.fold_accuracies == first.fold_accuracies));
    assert_eq!(all.to_csv().lines().count(), SelectionMethod::ALL.len() + 1);

    assert!(compare_feature_selection(&fm, &[SelectionMethod::Dsdc], &[26], 3, 7).is_err());
    assert!(compare_feature_selection(&fm, &[SelectionMethod::Dsdc], &[0], 3, 7).is_err());
}

#[test]
fn confusion_counts_add_up() {
    let mut rng = seeds::rng(9);
    let truth: Vec<Label> = (0..200)
        .map(|_| {
            if rng.random_bool(0.4) {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let predicted: Vec<Label> = (0..200)
        .map(|_| {
            if rng.random_bool(0.5) {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let cm = ConfusionMatrix::from_predictions(&truth, &predicted).unwrap();
    let agree = truth.iter().zip(&predicted).filter(|(a, b)| a == b).count();
    assert_eq!(cm.correct(), agree);
    assert_eq!(cm.total(), 200);
    let m = cm.metrics();
    let expected = agree as f64 / 200.0;
    assert!((m.accuracy.unwrap() - expected).abs() < 1e-15);
}

#[test]
fn threshold_accuracy_tracks_informative_features() {
    use fcnet::evaluation::threshold_cv_accuracy;
    let fm = synth_features(&SyntheticSpec::new(60, 5, 1.5, 40, 10)).unwrap();
    let informative = threshold_cv_accuracy(&fm, SelectionMethod::Dsdc, 1.0, 4, 10).unwrap();
    // Nothing scores above 2, so only the intercept remains.
    let empty = threshold_cv_accuracy(&fm, SelectionMethod::Dsdc, 2.5, 4, 10).unwrap();
    assert!(informative > 0.8, "{informative}");
    assert!(empty <= 0.55, "{empty}");
}
