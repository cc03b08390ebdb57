//! Analytic gradients against central finite differences.

use fcnet::data::Label;
use fcnet::network::{Mlp, NormStats, ParamSet, Vae};
use fcnet::seeds;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

/// Largest `|a − n| / max(|a|, |n|, FLOOR)` over every parameter.
fn max_relative_error<P: ParamSet>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> f64 {
    let grads: Vec<f64> = analytic.tensors().concat();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    let tensor_lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (t, &len) in tensor_lens.iter().enumerate() {
        for i in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[t][i] += STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[t][i] -= STEP;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * STEP);
            let a = grads[flat];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
            flat += 1;
        }
    }
    worst
}

fn matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Network widths up to 8 and a batch of 8 to 16 rows. Wider batches keep
/// the per-node normalization ranges, and hence the curvature that central
/// differences have to resolve, moderate.
fn dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize, usize) {
    (
        rng.random_range(2..=8),
        rng.random_range(2..=8),
        rng.random_range(2..=8),
        rng.random_range(8..=16),
    )
}

#[test]
fn vae_gradients_match_finite_differences() {
    let mut rng = seeds::rng(101);
    let mut checked = 0;
    while checked < 20 {
        let (input, hidden, latent, batch) = dims(&mut rng);
        let vae = Vae::random(input, hidden, latent, &mut rng);
        let x = matrix(batch, input, &mut rng);
        let eps = matrix(batch, latent, &mut rng);
        let stats = vae.fit_stats(x.view(), eps.view()).unwrap();
        // Stay away from the |r| kink of the reconstruction loss.
        if near_kink(&vae, &x, &eps, &stats) {
            continue;
        }
        let beta = rng.random_range(0.0..1.0);
        let (_, grad) = vae
            .loss_and_gradients(x.view(), eps.view(), beta, &stats)
            .unwrap();
        let err = max_relative_error(&vae, &grad, |p| {
            p.loss(x.view(), eps.view(), beta, &stats).unwrap().total
        });
        assert!(err < 1e-4, "network {checked}: relative error {err}");
        checked += 1;
    }
}

fn near_kink(
    vae: &Vae,
    x: &Array2<f64>,
    eps: &Array2<f64>,
    stats: &fcnet::network::VaeStats,
) -> bool {
    for (row, e) in x.rows().into_iter().zip(eps.rows()) {
        let (latent, _) = fcnet::network::encoder_forward(
            &vae.encoder,
            row.as_slice().unwrap(),
            e.as_slice().unwrap(),
            &stats.encoder,
        )
        .unwrap();
        let recon =
            fcnet::network::decoder_forward(&vae.decoder, &latent.z, &stats.decoder).unwrap();
        if recon
            .iter()
            .zip(row.iter())
            .any(|(r, v)| (r - v).abs() < 1e-2)
        {
            return true;
        }
    }
    false
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = seeds::rng(202);
    for n in 0..20 {
        let (input, h1, h2, batch) = dims(&mut rng);
        let mlp = Mlp::random(input, h1, h2, &mut rng);
        let x = matrix(batch, input, &mut rng);
        let mut labels: Vec<Label> = (0..batch)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        let stats = mlp.fit_stats(x.view()).unwrap();
        let (_, grad) = mlp.loss_and_gradients(x.view(), &labels, &stats).unwrap();
        let err = max_relative_error(&mlp, &grad, |p| {
            fcnet::network::cross_entropy(p, x.view(), &labels, &stats).unwrap()
        });
        assert!(err < 1e-4, "network {n}: relative error {err}");
    }
}

#[test]
fn degenerate_node_has_zero_gradient() {
    let mut rng = seeds::rng(3);
    let mlp = Mlp::random(3, 4, 2, &mut rng);
    let x = matrix(5, 3, &mut rng);
    let mut stats = mlp.fit_stats(x.view()).unwrap();
    stats.hidden1 = NormStats {
        min: vec![0.0; 4],
        max: vec![0.0; 4],
    };
    let labels = [
        Label::Positive,
        Label::Negative,
        Label::Positive,
        Label::Negative,
        Label::Positive,
    ];
    let (_, grad) = mlp.loss_and_gradients(x.view(), &labels, &stats).unwrap();
    assert!(grad.hidden1.weights.iter().all(|&g| g == 0.0));
    assert!(grad.hidden2.weights.iter().all(|&g| g == 0.0));
}
