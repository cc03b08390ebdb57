use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_selection::{
    select_by_threshold, select_top_k, FeatureRanking, FeatureSubset, SelectionMethod,
};

/// Which checkpoint rule decides whether an epoch's parameters are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ConstraintType {
    #[default]
    #[serde(rename = "none")]
    None,
    /// Prefer sensitivity: saved epochs keep `sen − spe` high.
    #[serde(rename = "1")]
    Sensitivity,
    /// Prefer specificity: saved epochs keep `spe − sen` high.
    #[serde(rename = "2")]
    Specificity,
    /// Keep `|sen − spe|` small.
    #[serde(rename = "balanced")]
    Balanced,
}

impl ConstraintType {
    pub const ALL: [ConstraintType; 4] = [
        ConstraintType::None,
        ConstraintType::Sensitivity,
        ConstraintType::Specificity,
        ConstraintType::Balanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintType::None => "none",
            ConstraintType::Sensitivity => "1",
            ConstraintType::Specificity => "2",
            ConstraintType::Balanced => "balanced",
        }
    }
}

impl fmt::Display for ConstraintType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstraintType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown constraint {s:?} (expected none, 1, 2 or balanced)"
                ))
            })
    }
}

/// How features are chosen before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    /// Keep features scoring strictly above this value.
    pub threshold: Option<f64>,
    /// Keep the `top_k` best features; overrides `threshold` when set.
    pub top_k: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            method: SelectionMethod::Dsdc,
            threshold: Some(0.241),
            top_k: None,
        }
    }
}

impl SelectionConfig {
    /// The subset this rule picks from `ranking`; `top_k` wins over `threshold`.
    pub fn apply(&self, ranking: &FeatureRanking) -> Result<FeatureSubset> {
        match (self.top_k, self.threshold) {
            (Some(k), _) => select_top_k(ranking, k),
            (None, Some(t)) => Ok(select_by_threshold(ranking, t)),
            (None, None) => Err(Error::input("selection needs a threshold or top_k")),
        }
    }
}

/// Hyperparameters for pretraining and fine-tuning. Every field is optional
/// in JSON; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub batch_size: usize,
    pub max_training_epoch: usize,
    /// Pretraining epoch cap; falls back to `max_training_epoch`.
    pub pretrain_epochs: Option<usize>,
    pub early_stop_patience: usize,
    /// Weight of the KL term in the VAE objective.
    pub beta: f64,
    pub seed: Option<u64>,
    pub constraint_type: ConstraintType,
    pub constraint_threshold: f64,
    /// Widths of the two hidden layers; the VAE latent size is the second.
    pub hidden_widths: [usize; 2],
    pub selection: SelectionConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-4,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            batch_size: 32,
            max_training_epoch: 500,
            pretrain_epochs: None,
            early_stop_patience: 20,
            beta: 1e-3,
            seed: None,
            constraint_type: ConstraintType::None,
            constraint_threshold: 0.3,
            hidden_widths: [250, 150],
            selection: SelectionConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        positive(self.learning_rate, "learning_rate")?;
        positive(self.rmsprop_epsilon, "rmsprop_epsilon")?;
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(Error::input(format!(
                "rmsprop_decay must lie in (0, 1), got {}",
                self.rmsprop_decay
            )));
        }
        if self.batch_size == 0 || self.max_training_epoch == 0 {
            return Err(Error::input(
                "batch_size and max_training_epoch must be > 0",
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::input(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !self.constraint_threshold.is_finite() {
            return Err(Error::input("constraint_threshold must be finite"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::input("hidden widths must be > 0"));
        }
        if let Some(t) = self.selection.threshold {
            if t.is_nan() {
                return Err(Error::input("selection threshold must not be NaN"));
            }
        }
        if self.selection.threshold.is_none() && self.selection.top_k.is_none() {
            return Err(Error::input("selection needs a threshold or top_k"));
        }
        Ok(())
    }

    pub fn pretrain_epochs(&self) -> usize {
        self.pretrain_epochs.unwrap_or(self.max_training_epoch)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainingConfig =
            serde_json::from_str(text).map_err(|e| Error::input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = TrainingConfig::from_json("{}").unwrap();
        assert_eq!(cfg, TrainingConfig::default());
        assert_eq!(cfg.learning_rate, 1e-4);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.max_training_epoch, 500);
        assert_eq!(cfg.early_stop_patience, 20);
        assert_eq!(cfg.constraint_threshold, 0.3);
        assert_eq!(cfg.pretrain_epochs(), 500);
    }

    #[test]
    fn constraint_names_round_trip() {
        let cfg = TrainingConfig::from_json(r#"{"constraint_type": "1", "seed": 7}"#).unwrap();
        assert_eq!(cfg.constraint_type, ConstraintType::Sensitivity);
        assert_eq!(cfg.seed, Some(7));
        for c in ConstraintType::ALL {
            assert_eq!(c.name().parse::<ConstraintType>().unwrap(), c);
        }
        assert!("3".parse::<ConstraintType>().is_err());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(TrainingConfig::from_json(r#"{"learning_rat": 0.1}"#).is_err());
        assert!(TrainingConfig::from_json(r#"{"learning_rate": 0}"#).is_err());
        assert!(TrainingConfig::from_json(r#"{"rmsprop_decay": 1.0}"#).is_err());
        assert!(TrainingConfig::from_json(r#"{"batch_size": 0}"#).is_err());
        assert!(TrainingConfig::from_json(r#"{"selection": {"method": "svm"}}"#).is_err());
    }
}
