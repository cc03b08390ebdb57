use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rmsprop::{rmsprop_step, OptimizerState};
use super::TrainingConfig;
use crate::error::{Error, Result};
use crate::network::{Encoder, NormStats, Vae, VaeStats};
use crate::seeds::{self, stage};

/// Encoder parameters after pretraining, with hidden-layer stats frozen from
/// a full pass over the pretraining data.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedEncoder {
    pub encoder: Encoder,
    pub stats: NormStats,
    /// Objective on the full data set with one fixed ε draw: entry 0 before
    /// training, then one entry per epoch.
    pub loss_history: Vec<f64>,
}

fn draw_eps(rows: usize, latent: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, latent), || rng.sample(StandardNormal))
}

fn full_loss(
    vae: &Vae,
    x: ArrayView2<'_, f64>,
    eps: ArrayView2<'_, f64>,
    beta: f64,
) -> Result<f64> {
    let stats: VaeStats = vae.fit_stats(x, eps)?;
    Ok(vae.loss(x, eps, beta, &stats)?.total)
}

/// Trains the simplified VAE on `x` (labels play no part) and returns its
/// encoder. Widths come from `cfg.hidden_widths`; every shuffle and ε draw is
/// seeded from `seed`.
pub fn pretrain_vae(
    x: ArrayView2<'_, f64>,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<PretrainedEncoder> {
    cfg.validate()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::input("pretraining needs a non-empty matrix"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("pretraining data must be finite"));
    }
    let [hidden, latent] = cfg.hidden_widths;
    let mut vae = Vae::random(
        x.ncols(),
        hidden,
        latent,
        &mut seeds::rng(seeds::derive(seed, &[stage::PRETRAIN, stage::INIT])),
    );
    let mut opt = OptimizerState::new(&vae);
    let rms = super::rmsprop_of(cfg);
    let monitor_eps = draw_eps(
        x.nrows(),
        latent,
        &mut seeds::rng(seeds::derive(seed, &[stage::PRETRAIN, stage::VALIDATION])),
    );
    let mut loss_history = vec![full_loss(&vae, x, monitor_eps.view(), cfg.beta)?];
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    for epoch in 0..cfg.pretrain_epochs() {
        let mut rng = seeds::rng(seeds::derive(seed, &[stage::PRETRAIN, epoch as u64]));
        order.shuffle(&mut rng);
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), idx);
            let eps = draw_eps(idx.len(), latent, &mut rng);
            let stats = vae.fit_stats(xb.view(), eps.view())?;
            let (loss, grad) = vae.loss_and_gradients(xb.view(), eps.view(), cfg.beta, &stats)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    stage: "pretraining",
                    epoch,
                    batch,
                });
            }
            rmsprop_step(&mut vae, &grad, &mut opt, rms)?;
        }
        let loss = full_loss(&vae, x, monitor_eps.view(), cfg.beta)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "pretraining",
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
            });
        }
        loss_history.push(loss);
    }
    let stats = NormStats::fit(vae.encoder.layer1.forward(x).view())?;
    Ok(PretrainedEncoder {
        encoder: vae.encoder,
        stats,
        loss_history,
    })
}
