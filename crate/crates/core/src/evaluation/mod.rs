//! Stratified splits, cross-validation, metrics, ROC/DET curves, Welch's
//! t-test, and the feature-selection comparison harness.
//!
//! Positive is always the patient class: sensitivity is the positive-class
//! recall and ROC scores are the softmax probability of the positive class.

mod baseline;
mod compare;
mod cv;
mod metrics;
mod roc;
mod split;
mod ttest;

pub use baseline::{linear_baseline, BaselineOptions, LinearBaseline};
pub use compare::{
    compare_feature_selection, threshold_cv_accuracy, ComparisonReport, ComparisonRow,
};
pub use cv::{
    grid_search_widths, run_cv, run_cv_observed, CvObserver, CvOptions, EvaluationReport, FoldRef,
    FoldResult,
};
pub use metrics::{metrics, ConfusionMatrix, Metrics};
pub use roc::{det_curve, roc_and_auc, roc_to_det, DetPoint, RocCurve, RocPoint};
pub use split::{
    kfold_plan, largest_remainder, stratified_split, train_validation_split, FoldSplit, SplitPlan,
};
pub use ttest::{
    ln_gamma, regularized_incomplete_beta, student_t_two_sided, welch_ttest, WelchTest,
};
