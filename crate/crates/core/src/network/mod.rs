//! Dense networks: the simplified VAE used for pretraining and the MLP
//! classifier it initializes.
//!
//! Every hidden layer uses the normalization + modified-tanh pipeline:
//! pre-activations are min-max scaled per node to `[-1, 1]` using
//! [`NormStats`], then passed through `tanh(2.5 · x)`. During training the
//! stats come from the current mini-batch and are treated as constants by
//! backpropagation; trained models carry stats frozen from a full pass over
//! the training set.

mod mlp;
mod model;
mod vae;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClassCounts, Label};
use crate::error::{Error, Result};

pub use mlp::{cross_entropy, mlp_forward, mlp_gradients, Mlp, MlpStats};
pub use model::{TrainedModel, MODEL_FORMAT_VERSION};
pub use vae::{
    decoder_forward, encoder_forward, kl_divergence, vae_gradients, vae_loss, Decoder, Encoder,
    LatentSample, Vae, VaeLoss, VaeStats,
};

/// Gain of the modified tanh.
pub const ACTIVATION_GAIN: f64 = 2.5;

/// Index of the positive (ASD-analog) class in logits and probabilities.
pub const POSITIVE: usize = 0;
/// Index of the negative (HC-analog) class.
pub const NEGATIVE: usize = 1;

pub(crate) fn class_index(label: Label) -> usize {
    if label.is_positive() {
        POSITIVE
    } else {
        NEGATIVE
    }
}

/// Fully connected layer; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weights: Array2::zeros((output, input)),
            biases: Array1::zeros(output),
        }
    }

    /// Glorot-uniform weights in `±√(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let r = (6.0 / (input + output) as f64).sqrt();
        Dense {
            weights: Array2::from_shape_fn((output, input), |_| rng.random_range(-r..r)),
            biases: Array1::zeros(output),
        }
    }

    pub fn from_parts(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::input(format!(
                "layer has {} weight rows but {} biases",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("layer parameters must be finite"));
        }
        Ok(Dense {
            weights: weights.as_standard_layout().into_owned(),
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// `x · Wᵀ + b` for a batch `x` of shape `batch × in`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.output_dim()));
        general_mat_mul(1.0, &x, &self.weights.t(), 0.0, &mut out);
        out += &self.biases;
        out
    }

    /// Accumulates this layer's parameter gradients into `grad` and returns
    /// the gradient with respect to the layer input.
    fn backward(
        &self,
        input: ArrayView2<'_, f64>,
        d_out: ArrayView2<'_, f64>,
        grad: &mut Dense,
        need_input_grad: bool,
    ) -> Option<Array2<f64>> {
        general_mat_mul(1.0, &d_out.t(), &input, 1.0, &mut grad.weights);
        grad.biases += &d_out.sum_axis(Axis(0));
        need_input_grad.then(|| {
            let mut d_in = Array2::zeros((d_out.nrows(), self.input_dim()));
            general_mat_mul(1.0, &d_out, &self.weights, 0.0, &mut d_in);
            d_in
        })
    }

    fn check_input(&self, width: usize, what: &str) -> Result<()> {
        if width != self.input_dim() {
            return Err(Error::input(format!(
                "{what}: expected input width {}, got {width}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Parameter containers that an optimizer can walk as flat slices.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    fn zeros_like(&self) -> Self;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.weights.as_slice().expect("standard layout"),
            self.biases.as_slice().expect("standard layout"),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.weights.as_slice_mut().expect("standard layout"),
            self.biases.as_slice_mut().expect("standard layout"),
        ]
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.input_dim(), self.output_dim())
    }
}

/// Per-node min and max of hidden pre-activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Column-wise min/max over a non-empty batch.
    pub fn fit(pre: ArrayView2<'_, f64>) -> Result<Self> {
        if pre.nrows() == 0 {
            return Err(Error::input(
                "cannot fit normalization stats on an empty batch",
            ));
        }
        let mut min = vec![f64::INFINITY; pre.ncols()];
        let mut max = vec![f64::NEG_INFINITY; pre.ncols()];
        for row in pre.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(NormStats { min, max })
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::input("normalization stats min/max lengths differ"));
        }
        if self
            .min
            .iter()
            .zip(&self.max)
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi >= lo))
        {
            return Err(Error::input(
                "normalization stats need finite x_max >= x_min",
            ));
        }
        Ok(())
    }

    /// `d x_norm / d x` per node: `2 / (x_max − x_min)`, or 0 for a
    /// degenerate node whose normalized output is pinned to 0.
    fn scales(&self) -> Vec<f64> {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(lo, hi)| if hi > lo { 2.0 / (hi - lo) } else { 0.0 })
            .collect()
    }

    fn normalize(&self, x: f64, j: usize, scale: f64) -> f64 {
        if scale == 0.0 {
            0.0
        } else {
            (x - self.min[j]) * scale - 1.0
        }
    }

    /// Normalization + modified tanh over a batch.
    pub fn activate(&self, pre: ArrayView2<'_, f64>) -> Array2<f64> {
        let scales = self.scales();
        let mut out = pre.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (ACTIVATION_GAIN * self.normalize(*v, j, scales[j])).tanh();
            }
        }
        out
    }

    /// Chains `d_out` (gradient w.r.t. activations `act`) back to the
    /// pre-activations, with the stats held constant.
    fn backward(&self, act: ArrayView2<'_, f64>, d_out: &mut Array2<f64>) {
        let scales = self.scales();
        for (mut d_row, a_row) in d_out.rows_mut().into_iter().zip(act.rows()) {
            for (j, (d, y)) in d_row.iter_mut().zip(a_row.iter()).enumerate() {
                *d *= ACTIVATION_GAIN * (1.0 - y * y) * scales[j];
            }
        }
    }
}

/// Normalization + modified tanh for one sample.
pub fn norm_act_forward(pre: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    if pre.len() != stats.len() {
        return Err(Error::input(format!(
            "activation input has {} nodes, stats have {}",
            pre.len(),
            stats.len()
        )));
    }
    let view = ArrayView2::from_shape((1, pre.len()), pre).expect("shape");
    Ok(stats.activate(view).into_raw_vec_and_offset().0)
}

/// Numerically stable two-class softmax.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Positive iff `p_pos / p_neg > n_pos / n_neg`; the boundary itself is
/// negative. `counts` are the training-set class sizes.
pub fn predict_with_threshold_moving(probs: [f64; 2], counts: ClassCounts) -> Result<Label> {
    if !counts.both_present() {
        return Err(Error::input(
            "threshold moving needs both training class counts > 0",
        ));
    }
    // Cross-multiplied so that p_neg = 0 is handled.
    let lhs = probs[POSITIVE] * counts.negative as f64;
    let rhs = probs[NEGATIVE] * counts.positive as f64;
    Ok(if lhs > rhs {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// Plain argmax decision; ties go to the negative class.
pub fn predict_argmax(probs: [f64; 2]) -> Label {
    if probs[POSITIVE] > probs[NEGATIVE] {
        Label::Positive
    } else {
        Label::Negative
    }
}
