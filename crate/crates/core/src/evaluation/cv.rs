use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ConfusionMatrix, Metrics};
use super::roc::{roc_and_auc, roc_to_det, DetPoint, RocPoint};
use super::split::{kfold_plan, FoldSplit};
use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::feature_selection::rank_features;
use crate::format::sig17;
use crate::network::{predict_with_threshold_moving, POSITIVE};
use crate::seeds::{self, stage};
use crate::training::{train_classifier, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvOptions {
    pub repeats: usize,
    pub folds: usize,
    /// Initialize the MLP from a pretrained VAE encoder.
    pub pretrain: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            repeats: 10,
            folds: 10,
            pretrain: true,
        }
    }
}

/// Notifications a caller can observe while CV runs. `selection_rows` lists
/// the rows that feature selection of a fold reads.
pub trait CvObserver: Sync {
    fn selection_rows(&self, _repeat: usize, _fold: usize, _rows: &[usize]) {}
}

struct NoObserver;
impl CvObserver for NoObserver {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// AUC of this fold's test scores.
    pub auc: f64,
    pub num_features: usize,
    pub saved_epoch: usize,
    pub epochs_run: usize,
    pub training_seconds: f64,
    pub test_indices: Vec<usize>,
    /// Softmax `p_pos` per test row, before threshold moving.
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRef {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub options: CvOptions,
    pub config: TrainingConfig,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub mean_sensitivity: Option<f64>,
    pub mean_specificity: Option<f64>,
    pub mean_auc: f64,
    pub mean_training_seconds: f64,
    pub best_fold: FoldRef,
    pub worst_fold: FoldRef,
    /// ROC of all test predictions pooled across folds and repeats.
    pub roc: Vec<RocPoint>,
    pub pooled_auc: f64,
    pub det: Vec<DetPoint>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean over folds, or `None` if any fold leaves the metric undefined.
fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let all: Option<Vec<f64>> = values.collect();
    all.and_then(|v| mean(v.into_iter()))
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(sig17).unwrap_or_default()
}

impl FoldResult {
    fn as_ref(&self) -> FoldRef {
        FoldRef {
            repeat: self.repeat,
            fold: self.fold,
            accuracy: self.metrics.accuracy.unwrap_or(0.0),
            sensitivity: self.metrics.sensitivity,
            specificity: self.metrics.specificity,
        }
    }
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn folds_csv(&self) -> String {
        let mut out = String::from(
            "repeat,fold,tp,fn,tn,fp,accuracy,sensitivity,specificity,auc,num_features,saved_epoch\n",
        );
        for f in &self.folds {
            let c = f.confusion;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                f.repeat,
                f.fold,
                c.tp,
                c.fn_,
                c.tn,
                c.fp,
                opt_csv(f.metrics.accuracy),
                opt_csv(f.metrics.sensitivity),
                opt_csv(f.metrics.specificity),
                sig17(f.auc),
                f.num_features,
                f.saved_epoch,
            ));
        }
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.roc {
            out.push_str(&format!("{},{}\n", sig17(p.fpr), sig17(p.tpr)));
        }
        out
    }

    pub fn det_csv(&self) -> String {
        let mut out = String::from("fpr,fnr\n");
        for p in &self.det {
            out.push_str(&format!("{},{}\n", sig17(p.fpr), sig17(p.fnr)));
        }
        out
    }

    /// Copy with wall-clock fields zeroed, for comparing runs.
    pub fn without_timings(&self) -> EvaluationReport {
        let mut r = self.clone();
        r.mean_training_seconds = 0.0;
        for f in &mut r.folds {
            f.training_seconds = 0.0;
        }
        r
    }
}

/// Repeated stratified k-fold CV of the full pipeline. Folds run in
/// parallel on the current rayon pool; results do not depend on its size.
pub fn run_cv(
    fm: &FeatureMatrix,
    cfg: &TrainingConfig,
    opts: CvOptions,
    seed: u64,
) -> Result<EvaluationReport> {
    run_cv_observed(fm, cfg, opts, seed, &NoObserver)
}

pub fn run_cv_observed(
    fm: &FeatureMatrix,
    cfg: &TrainingConfig,
    opts: CvOptions,
    seed: u64,
    observer: &dyn CvObserver,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let plan = kfold_plan(fm.labels(), opts.folds, opts.repeats, seed)?;
    let jobs: Vec<(usize, usize, &FoldSplit)> = plan
        .folds
        .iter()
        .enumerate()
        .flat_map(|(r, folds)| folds.iter().enumerate().map(move |(f, s)| (r, f, s)))
        .collect();
    let folds: Vec<FoldResult> = jobs
        .into_par_iter()
        .map(|(r, f, split)| {
            let fold_seed = seeds::derive(seed, &[stage::FOLD, r as u64, f as u64]);
            run_fold(fm, cfg, opts, split, r, f, fold_seed, observer)
                .map_err(|e| e.context(format!("repeat {r}, fold {f}")))
        })
        .collect::<Result<_>>()?;
    assemble(fm, cfg, opts, seed, folds)
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    fm: &FeatureMatrix,
    cfg: &TrainingConfig,
    opts: CvOptions,
    split: &FoldSplit,
    repeat: usize,
    fold: usize,
    seed: u64,
    observer: &dyn CvObserver,
) -> Result<FoldResult> {
    let start = Instant::now();
    let train = fm.select_rows(&split.train);
    observer.selection_rows(repeat, fold, &split.train);
    let ranking = rank_features(&train, cfg.selection.method)?;
    let subset = cfg.selection.apply(&ranking)?;
    if subset.is_empty() {
        return Err(Error::input(format!(
            "feature selection kept no features ({} method)",
            cfg.selection.method
        )));
    }
    let cols = &subset.selected_indices;
    let train = train.select_columns(cols)?;
    let val = fm.select_rows(&split.validation).select_columns(cols)?;
    let outcome = train_classifier(&train, &val, cfg, seed, opts.pretrain)?;
    let training_seconds = start.elapsed().as_secs_f64();

    let model = &outcome.fine_tune.model;
    let test = fm.select_rows(&split.test).select_columns(cols)?;
    let probs = model.probabilities(test.values().view())?;
    let predicted = probs
        .iter()
        .map(|&p| predict_with_threshold_moving(p, model.class_counts))
        .collect::<Result<Vec<Label>>>()?;
    let confusion = ConfusionMatrix::from_predictions(test.labels(), &predicted)?;
    let test_scores: Vec<f64> = probs.iter().map(|p| p[POSITIVE]).collect();
    let auc = roc_and_auc(&test_scores, test.labels())?.auc;
    Ok(FoldResult {
        repeat,
        fold,
        seed,
        confusion,
        metrics: confusion.metrics(),
        auc,
        num_features: cols.len(),
        saved_epoch: outcome.fine_tune.saved_epoch,
        epochs_run: outcome.fine_tune.history.len(),
        training_seconds,
        test_indices: split.test.clone(),
        test_scores,
    })
}

fn assemble(
    fm: &FeatureMatrix,
    cfg: &TrainingConfig,
    opts: CvOptions,
    seed: u64,
    folds: Vec<FoldResult>,
) -> Result<EvaluationReport> {
    let acc = |f: &FoldResult| f.metrics.accuracy.unwrap_or(0.0);
    let mut best = &folds[0];
    let mut worst = &folds[0];
    for f in &folds {
        if acc(f) > acc(best) {
            best = f;
        }
        if acc(f) < acc(worst) {
            worst = f;
        }
    }
    let (scores, labels): (Vec<f64>, Vec<Label>) = folds
        .iter()
        .flat_map(|f| {
            f.test_scores
                .iter()
                .zip(&f.test_indices)
                .map(|(&s, &i)| (s, fm.labels()[i]))
        })
        .unzip();
    let pooled = roc_and_auc(&scores, &labels)?;
    Ok(EvaluationReport {
        seed,
        options: opts,
        config: cfg.clone(),
        mean_accuracy: mean(folds.iter().map(acc)).unwrap_or(0.0),
        mean_sensitivity: mean_defined(folds.iter().map(|f| f.metrics.sensitivity)),
        mean_specificity: mean_defined(folds.iter().map(|f| f.metrics.specificity)),
        mean_auc: mean(folds.iter().map(|f| f.auc)).unwrap_or(0.0),
        mean_training_seconds: mean(folds.iter().map(|f| f.training_seconds)).unwrap_or(0.0),
        best_fold: best.as_ref(),
        worst_fold: worst.as_ref(),
        det: roc_to_det(&pooled.points),
        roc: pooled.points,
        pooled_auc: pooled.auc,
        folds,
    })
}

/// Mean CV accuracy for each candidate pair of hidden widths.
pub fn grid_search_widths(
    fm: &FeatureMatrix,
    cfg: &TrainingConfig,
    opts: CvOptions,
    seed: u64,
    grid: &[[usize; 2]],
) -> Result<Vec<([usize; 2], f64)>> {
    grid.iter()
        .map(|&widths| {
            let cfg = TrainingConfig {
                hidden_widths: widths,
                ..cfg.clone()
            };
            Ok((widths, run_cv(fm, &cfg, opts, seed)?.mean_accuracy))
        })
        .collect()
}
