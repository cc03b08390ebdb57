use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::linear_baseline;
use super::metrics::ConfusionMatrix;
use super::split::kfold_plan;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::feature_selection::{rank_features, select_by_threshold, select_top_k, SelectionMethod};
use crate::format::sig17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: SelectionMethod,
    pub k: usize,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,k,mean_accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.method,
                r.k,
                sig17(r.mean_accuracy)
            ));
        }
        out
    }

    pub fn row(&self, method: SelectionMethod, k: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method && r.k == k)
    }
}

/// For each method and `k`, the mean stratified k-fold accuracy of the
/// linear baseline on the top-`k` features, ranked on each fold's training
/// rows only. Validation rows join training since the baseline has no
/// checkpointing.
pub fn compare_feature_selection(
    fm: &FeatureMatrix,
    methods: &[SelectionMethod],
    k_grid: &[usize],
    folds: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if methods.is_empty() || k_grid.is_empty() {
        return Err(Error::input("need at least one method and one k"));
    }
    if let Some(&k) = k_grid.iter().find(|&&k| k == 0 || k > fm.cols()) {
        return Err(Error::input(format!(
            "k = {k} outside 1..={} features",
            fm.cols()
        )));
    }
    let plan = kfold_plan(fm.labels(), folds, 1, seed)?;
    // accuracy[fold][method][k]
    let per_fold: Vec<Vec<Vec<f64>>> = plan.folds[0]
        .par_iter()
        .map(|split| {
            let mut rows = [split.train.clone(), split.validation.clone()].concat();
            rows.sort_unstable();
            let train = fm.select_rows(&rows);
            let test = fm.select_rows(&split.test);
            methods
                .iter()
                .map(|&m| {
                    let ranking = rank_features(&train, m)?;
                    k_grid
                        .iter()
                        .map(|&k| {
                            let cols = select_top_k(&ranking, k)?.selected_indices;
                            let pred = linear_baseline(
                                &train.select_columns(&cols)?,
                                &test.select_columns(&cols)?,
                            )?;
                            let cm = ConfusionMatrix::from_predictions(test.labels(), &pred)?;
                            Ok(cm.metrics().accuracy.unwrap_or(0.0))
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (mi, &method) in methods.iter().enumerate() {
        for (ki, &k) in k_grid.iter().enumerate() {
            let fold_accuracies: Vec<f64> = per_fold.iter().map(|f| f[mi][ki]).collect();
            rows.push(ComparisonRow {
                method,
                k,
                mean_accuracy: fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64,
                fold_accuracies,
            });
        }
    }
    Ok(ComparisonReport { folds, seed, rows })
}

/// Mean stratified k-fold accuracy of the linear baseline on the features
/// scoring above `threshold`, ranked on each fold's training rows only.
/// Suitable as the evaluator of a threshold sweep.
pub fn threshold_cv_accuracy(
    fm: &FeatureMatrix,
    method: SelectionMethod,
    threshold: f64,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let plan = kfold_plan(fm.labels(), folds, 1, seed)?;
    let accuracies: Vec<f64> = plan.folds[0]
        .par_iter()
        .map(|split| {
            let mut rows = [split.train.clone(), split.validation.clone()].concat();
            rows.sort_unstable();
            let train = fm.select_rows(&rows);
            let test = fm.select_rows(&split.test);
            let cols =
                select_by_threshold(&rank_features(&train, method)?, threshold).selected_indices;
            let pred =
                linear_baseline(&train.select_columns(&cols)?, &test.select_columns(&cols)?)?;
            let cm = ConfusionMatrix::from_predictions(test.labels(), &pred)?;
            Ok(cm.metrics().accuracy.unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}
