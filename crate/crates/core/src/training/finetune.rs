use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::Serialize;

use super::gate::{constraint_gate, CheckpointGateState, GateMetrics};
use super::rmsprop::{rmsprop_step, OptimizerState};
use super::{ConstraintType, TrainingConfig};
use crate::data::{ClassCounts, FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::evaluation::{ConfusionMatrix, Metrics};
use crate::network::{predict_with_threshold_moving, Mlp, MlpStats, TrainedModel};
use crate::seeds::{self, stage};

/// What happened in one fine-tuning epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch cross entropy.
    pub train_loss: f64,
    /// Training accuracy with stats frozen from the full training set.
    pub train_accuracy: f64,
    pub validation: Metrics,
    pub saved: bool,
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    /// The last saved snapshot.
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
    pub saved_epoch: usize,
}

/// Threshold-moved confusion matrix of `mlp` on `(x, labels)`.
fn confusion(
    mlp: &Mlp,
    stats: &MlpStats,
    counts: ClassCounts,
    x: ArrayView2<'_, f64>,
    labels: &[Label],
) -> Result<ConfusionMatrix> {
    let predicted = mlp
        .probabilities(x, stats)?
        .into_iter()
        .map(|p| predict_with_threshold_moving(p, counts))
        .collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_predictions(labels, &predicted)
}

/// Mini-batch RMSProp on cross entropy with constraint-gated checkpointing
/// and patience-based early stopping.
pub fn fine_tune(
    init: Mlp,
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<FineTuneOutcome> {
    cfg.validate()?;
    init.validate()?;
    let counts = train.class_counts();
    if !counts.both_present() {
        return Err(Error::input("training split must contain both classes"));
    }
    if val.rows() == 0 {
        return Err(Error::input("validation split is empty"));
    }
    if cfg.constraint_type != ConstraintType::None && !val.class_counts().both_present() {
        return Err(Error::input(format!(
            "constraint {} needs both classes in the validation split",
            cfg.constraint_type
        )));
    }
    if val.cols() != train.cols() {
        return Err(Error::input("training and validation widths differ"));
    }
    let x = train.values().view();
    let labels = train.labels();
    let rms = super::rmsprop_of(cfg);
    let mut mlp = init;
    let mut opt = OptimizerState::new(&mlp);
    let mut gate = CheckpointGateState::new(cfg.constraint_type);
    let mut best: Option<(Mlp, MlpStats, usize)> = None;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.rows()).collect();
    let mut since_save = 0;
    for epoch in 0..cfg.max_training_epoch {
        let mut rng = seeds::rng(seeds::derive(seed, &[stage::FINETUNE, epoch as u64]));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), idx);
            let lb: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            let stats = mlp.fit_stats(xb.view())?;
            let (loss, grad) = mlp.loss_and_gradients(xb.view(), &lb, &stats)?;
            if !(loss.is_finite() && stats.is_finite()) {
                return Err(Error::NonFinite {
                    stage: "fine-tuning",
                    epoch,
                    batch,
                });
            }
            rmsprop_step(&mut mlp, &grad, &mut opt, rms)?;
            loss_sum += loss;
            batches += 1;
        }

        let stats = mlp.fit_stats(x)?;
        if !stats.is_finite() {
            return Err(Error::NonFinite {
                stage: "fine-tuning",
                epoch,
                batch: batches,
            });
        }
        let train_cm = confusion(&mlp, &stats, counts, x, labels)?;
        let val_cm = confusion(&mlp, &stats, counts, val.values().view(), val.labels())?;
        let validation = val_cm.metrics();
        let metrics = GateMetrics {
            accuracy: validation.accuracy.unwrap_or(0.0),
            sensitivity: validation.sensitivity.unwrap_or(0.0),
            specificity: validation.specificity.unwrap_or(0.0),
        };
        let (saved, next) = constraint_gate(
            &gate,
            metrics,
            cfg.constraint_type,
            cfg.constraint_threshold,
        );
        gate = next;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_accuracy: train_cm.metrics().accuracy.unwrap_or(0.0),
            validation,
            saved,
        });
        if saved {
            best = Some((mlp.clone(), stats, epoch));
            since_save = 0;
        } else {
            since_save += 1;
            if since_save >= cfg.early_stop_patience {
                break;
            }
        }
    }
    let Some((mlp, stats, saved_epoch)) = best else {
        return Err(Error::ConstraintNeverSatisfied {
            constraint: cfg.constraint_type.to_string(),
            epochs: history.len(),
        });
    };
    Ok(FineTuneOutcome {
        model: TrainedModel {
            mlp,
            stats,
            class_counts: counts,
            feature_indices: None,
        },
        history,
        saved_epoch,
    })
}
