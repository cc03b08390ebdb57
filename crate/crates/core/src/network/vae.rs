//! Simplified VAE: a single encoder head emits μ = logvar.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;

use super::{Dense, NormStats, ParamSet};
use crate::error::{Error, Result};

/// `input → hidden` (normalized tanh) then `hidden → latent` (linear, μ = logvar).
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layer1: Dense,
    pub layer2: Dense,
}

/// Mirror of the encoder: `latent → hidden` (normalized tanh), `hidden → input` (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub layer1: Dense,
    pub layer2: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vae {
    pub encoder: Encoder,
    pub decoder: Decoder,
}

/// Frozen or batch-local stats for the encoder and decoder hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeStats {
    pub encoder: NormStats,
    pub decoder: NormStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeLoss {
    /// `mae + β · kl`.
    pub total: f64,
    /// Batch mean of per-sample mean absolute reconstruction error.
    pub mae: f64,
    /// Batch mean of the KL divergence summed over latent dimensions.
    pub kl: f64,
}

impl Encoder {
    pub fn random(input: usize, hidden: usize, latent: usize, rng: &mut impl Rng) -> Self {
        Encoder {
            layer1: Dense::glorot(input, hidden, rng),
            layer2: Dense::glorot(hidden, latent, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer1.output_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layer2.output_dim()
    }
}

impl Decoder {
    pub fn random(latent: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Decoder {
            layer1: Dense::glorot(latent, hidden, rng),
            layer2: Dense::glorot(hidden, output, rng),
        }
    }
}

impl ParamSet for Encoder {
    fn tensors(&self) -> Vec<&[f64]> {
        [self.layer1.tensors(), self.layer2.tensors()].concat()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.tensors_mut();
        v.extend(self.layer2.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Encoder {
            layer1: self.layer1.zeros_like(),
            layer2: self.layer2.zeros_like(),
        }
    }
}

impl ParamSet for Decoder {
    fn tensors(&self) -> Vec<&[f64]> {
        [self.layer1.tensors(), self.layer2.tensors()].concat()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.layer1.tensors_mut();
        v.extend(self.layer2.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Decoder {
            layer1: self.layer1.zeros_like(),
            layer2: self.layer2.zeros_like(),
        }
    }
}

impl ParamSet for Vae {
    fn tensors(&self) -> Vec<&[f64]> {
        [self.encoder.tensors(), self.decoder.tensors()].concat()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Vae {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }
}

/// KL(N(μ, e^logvar) ‖ N(0, 1)) for one latent dimension.
pub fn kl_divergence(mu: f64, logvar: f64) -> f64 {
    -0.5 * (1.0 + logvar - logvar.exp() - mu * mu)
}

/// Reconstruction MAE (mean over features, then batch) plus `β` times the
/// batch mean of the KL divergence summed over latent dimensions. All
/// arrays are `batch × dim`.
pub fn vae_loss(
    recon: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    mu: ArrayView2<'_, f64>,
    logvar: ArrayView2<'_, f64>,
    beta: f64,
) -> Result<VaeLoss> {
    if recon.dim() != x.dim() || mu.dim() != logvar.dim() || mu.nrows() != x.nrows() {
        return Err(Error::input("vae_loss: mismatched array shapes"));
    }
    if !(beta >= 0.0) {
        return Err(Error::input("vae_loss: beta must be >= 0"));
    }
    let batch = x.nrows().max(1) as f64;
    let features = x.ncols().max(1) as f64;
    let abs_sum: f64 = Zip::from(&recon)
        .and(&x)
        .fold(0.0, |acc, r, t| acc + (r - t).abs());
    let kl_sum: f64 = Zip::from(&mu)
        .and(&logvar)
        .fold(0.0, |acc, &m, &l| acc + kl_divergence(m, l));
    let mae = abs_sum / (batch * features);
    let kl = kl_sum / batch;
    Ok(VaeLoss {
        total: mae + beta * kl,
        mae,
        kl,
    })
}

struct VaeTrace {
    hidden: Array2<f64>,
    mu: Array2<f64>,
    z: Array2<f64>,
    dec_hidden: Array2<f64>,
    recon: Array2<f64>,
}

impl Vae {
    pub fn random(input: usize, hidden: usize, latent: usize, rng: &mut impl Rng) -> Self {
        Vae {
            encoder: Encoder::random(input, hidden, latent, rng),
            decoder: Decoder::random(latent, hidden, input, rng),
        }
    }

    fn check(&self, x: ArrayView2<'_, f64>, eps: ArrayView2<'_, f64>) -> Result<()> {
        self.encoder.layer1.check_input(x.ncols(), "vae input")?;
        if eps.dim() != (x.nrows(), self.encoder.latent_dim()) {
            return Err(Error::input(format!(
                "ε draws must be {}×{}, got {:?}",
                x.nrows(),
                self.encoder.latent_dim(),
                eps.dim()
            )));
        }
        if self.decoder.layer1.input_dim() != self.encoder.latent_dim()
            || self.decoder.layer2.output_dim() != self.encoder.input_dim()
        {
            return Err(Error::input("decoder does not mirror encoder dimensions"));
        }
        Ok(())
    }

    /// Stats a training step would use for this batch: encoder stats from the
    /// batch's hidden pre-activations, decoder stats from the resulting
    /// latent samples.
    pub fn fit_stats(&self, x: ArrayView2<'_, f64>, eps: ArrayView2<'_, f64>) -> Result<VaeStats> {
        self.check(x, eps)?;
        let pre_hidden = self.encoder.layer1.forward(x);
        let encoder = NormStats::fit(pre_hidden.view())?;
        let hidden = encoder.activate(pre_hidden.view());
        let mu = self.encoder.layer2.forward(hidden.view());
        let z = reparameterize(mu.view(), eps);
        let decoder = NormStats::fit(self.decoder.layer1.forward(z.view()).view())?;
        Ok(VaeStats { encoder, decoder })
    }

    fn trace(
        &self,
        x: ArrayView2<'_, f64>,
        eps: ArrayView2<'_, f64>,
        stats: &VaeStats,
    ) -> VaeTrace {
        let hidden = stats
            .encoder
            .activate(self.encoder.layer1.forward(x).view());
        let mu = self.encoder.layer2.forward(hidden.view());
        let z = reparameterize(mu.view(), eps);
        let dec_hidden = stats
            .decoder
            .activate(self.decoder.layer1.forward(z.view()).view());
        let recon = self.decoder.layer2.forward(dec_hidden.view());
        VaeTrace {
            hidden,
            mu,
            z,
            dec_hidden,
            recon,
        }
    }

    pub fn loss(
        &self,
        x: ArrayView2<'_, f64>,
        eps: ArrayView2<'_, f64>,
        beta: f64,
        stats: &VaeStats,
    ) -> Result<VaeLoss> {
        self.check(x, eps)?;
        let t = self.trace(x, eps, stats);
        vae_loss(t.recon.view(), x, t.mu.view(), t.mu.view(), beta)
    }

    /// Loss and its gradient with respect to every parameter, with `stats`
    /// held constant.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        eps: ArrayView2<'_, f64>,
        beta: f64,
        stats: &VaeStats,
    ) -> Result<(VaeLoss, Vae)> {
        self.check(x, eps)?;
        let t = self.trace(x, eps, stats);
        let loss = vae_loss(t.recon.view(), x, t.mu.view(), t.mu.view(), beta)?;
        let batch = x.nrows().max(1) as f64;
        let norm = batch * x.ncols().max(1) as f64;
        let mut grad = self.zeros_like();

        // Subgradient of |r| uses sign(0) = 0.
        let d_recon = Zip::from(&t.recon).and(&x).map_collect(|r, v| {
            let d = r - v;
            if d > 0.0 {
                1.0 / norm
            } else if d < 0.0 {
                -1.0 / norm
            } else {
                0.0
            }
        });
        let mut d_dec_hidden = self
            .decoder
            .layer2
            .backward(
                t.dec_hidden.view(),
                d_recon.view(),
                &mut grad.decoder.layer2,
                true,
            )
            .expect("input grad");
        stats
            .decoder
            .backward(t.dec_hidden.view(), &mut d_dec_hidden);
        let d_z = self
            .decoder
            .layer1
            .backward(
                t.z.view(),
                d_dec_hidden.view(),
                &mut grad.decoder.layer1,
                true,
            )
            .expect("input grad");

        // z = m + ε·exp(m/2) and KL(m, m) both depend on the shared head m.
        let mut d_mu = d_z;
        Zip::from(&mut d_mu)
            .and(&t.mu)
            .and(&eps)
            .for_each(|d, &m, &e| {
                let half = (0.5 * m).exp();
                *d = *d * (1.0 + 0.5 * e * half) + beta / batch * (m + 0.5 * (m.exp() - 1.0));
            });
        let mut d_hidden = self
            .encoder
            .layer2
            .backward(t.hidden.view(), d_mu.view(), &mut grad.encoder.layer2, true)
            .expect("input grad");
        stats.encoder.backward(t.hidden.view(), &mut d_hidden);
        self.encoder
            .layer1
            .backward(x, d_hidden.view(), &mut grad.encoder.layer1, false);
        Ok((loss, grad))
    }
}

fn reparameterize(mu: ArrayView2<'_, f64>, eps: ArrayView2<'_, f64>) -> Array2<f64> {
    Zip::from(&mu)
        .and(&eps)
        .map_collect(|&m, &e| m + e * (0.5 * m).exp())
}

/// Gradients of the VAE objective for a batch.
pub fn vae_gradients(
    vae: &Vae,
    x: ArrayView2<'_, f64>,
    eps: ArrayView2<'_, f64>,
    beta: f64,
    stats: &VaeStats,
) -> Result<Vae> {
    vae.loss_and_gradients(x, eps, beta, stats).map(|(_, g)| g)
}

/// Encoder pass for one sample: `h`, then μ = logvar, then `z = μ + ε·e^{logvar/2}`.
pub fn encoder_forward(
    enc: &Encoder,
    x: &[f64],
    eps: &[f64],
    stats: &NormStats,
) -> Result<(LatentSample, Vec<f64>)> {
    enc.layer1.check_input(x.len(), "encoder input")?;
    if eps.len() != enc.latent_dim() {
        return Err(Error::input(format!(
            "ε has {} entries, latent dimension is {}",
            eps.len(),
            enc.latent_dim()
        )));
    }
    if stats.len() != enc.hidden_dim() {
        return Err(Error::input("encoder stats do not match hidden width"));
    }
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("shape");
    let h = stats.activate(enc.layer1.forward(xv).view());
    let mu = enc.layer2.forward(h.view());
    let ev = ArrayView2::from_shape((1, eps.len()), eps).expect("shape");
    let z = reparameterize(mu.view(), ev);
    let mu = mu.into_raw_vec_and_offset().0;
    Ok((
        LatentSample {
            logvar: mu.clone(),
            mu,
            eps: eps.to_vec(),
            z: z.into_raw_vec_and_offset().0,
        },
        h.into_raw_vec_and_offset().0,
    ))
}

/// Decoder pass for one latent vector.
pub fn decoder_forward(dec: &Decoder, z: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    dec.layer1.check_input(z.len(), "decoder input")?;
    dec.layer2
        .check_input(dec.layer1.output_dim(), "decoder output layer")?;
    if stats.len() != dec.layer1.output_dim() {
        return Err(Error::input("decoder stats do not match hidden width"));
    }
    let zv = ArrayView2::from_shape((1, z.len()), z).expect("shape");
    let g = stats.activate(dec.layer1.forward(zv).view());
    Ok(dec.layer2.forward(g.view()).into_raw_vec_and_offset().0)
}
