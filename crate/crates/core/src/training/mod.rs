//! RMSProp optimization, VAE pretraining, parameter transfer and
//! constraint-gated fine-tuning.
//!
//! A full run is `pretrain_vae` on the training features, `transfer` of the
//! encoder into a fresh MLP, then `fine_tune` against a validation split.
//! [`train_classifier`] chains the three.

mod config;
mod finetune;
mod gate;
mod pretrain;
mod rmsprop;

use rand::Rng;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::network::{Dense, Encoder, Mlp};
use crate::seeds::{self, stage};

pub use config::{ConstraintType, SelectionConfig, TrainingConfig};
pub use finetune::{fine_tune, EpochRecord, FineTuneOutcome};
pub use gate::{constraint_gate, CheckpointGateState, GateMetrics};
pub use pretrain::{pretrain_vae, PretrainedEncoder};
pub use rmsprop::{rmsprop_step, OptimizerState, RmsProp};

fn rmsprop_of(cfg: &TrainingConfig) -> RmsProp {
    RmsProp {
        learning_rate: cfg.learning_rate,
        decay: cfg.rmsprop_decay,
        epsilon: cfg.rmsprop_epsilon,
    }
}

/// Copies both encoder layers into the MLP's hidden layers and draws a fresh
/// Glorot-uniform output layer.
pub fn transfer(enc: &Encoder, hidden_widths: [usize; 2], rng: &mut impl Rng) -> Result<Mlp> {
    if [enc.hidden_dim(), enc.latent_dim()] != hidden_widths {
        return Err(Error::input(format!(
            "encoder widths [{}, {}] do not match MLP hidden widths {:?}",
            enc.hidden_dim(),
            enc.latent_dim(),
            hidden_widths
        )));
    }
    Ok(Mlp {
        hidden1: enc.layer1.clone(),
        hidden2: enc.layer2.clone(),
        output: Dense::glorot(enc.latent_dim(), 2, rng),
    })
}

/// Result of [`train_classifier`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub fine_tune: FineTuneOutcome,
    /// Present when the MLP was initialized from a pretrained encoder.
    pub pretrain_loss: Option<Vec<f64>>,
}

/// Pretrain (optionally), transfer and fine-tune. Without pretraining the
/// MLP starts from Glorot-uniform weights.
pub fn train_classifier(
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    cfg: &TrainingConfig,
    seed: u64,
    pretrain: bool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let [h1, h2] = cfg.hidden_widths;
    let mut init_rng = seeds::rng(seeds::derive(seed, &[stage::INIT]));
    let (init, pretrain_loss) = if pretrain {
        let pre = pretrain_vae(train.values().view(), cfg, seed)?;
        let mlp = transfer(&pre.encoder, cfg.hidden_widths, &mut init_rng)?;
        (mlp, Some(pre.loss_history))
    } else {
        (Mlp::random(train.cols(), h1, h2, &mut init_rng), None)
    };
    let fine_tune = fine_tune(init, train, val, cfg, seed)?;
    Ok(TrainOutcome {
        fine_tune,
        pretrain_loss,
    })
}
