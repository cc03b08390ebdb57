//! Two-hidden-layer MLP classifier with softmax cross entropy.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::{class_index, softmax, Dense, NormStats, ParamSet, NEGATIVE, POSITIVE};
use crate::data::Label;
use crate::error::{Error, Result};

/// `input → hidden1 → hidden2 → 2 logits`; both hidden layers use the
/// normalized modified tanh, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub output: Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpStats {
    pub hidden1: NormStats,
    pub hidden2: NormStats,
}

impl MlpStats {
    /// False when a pre-activation overflowed while the stats were fitted.
    pub fn is_finite(&self) -> bool {
        [&self.hidden1, &self.hidden2]
            .iter()
            .all(|s| s.min.iter().chain(&s.max).all(|v| v.is_finite()))
    }
}

impl ParamSet for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        [
            self.hidden1.tensors(),
            self.hidden2.tensors(),
            self.output.tensors(),
        ]
        .concat()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden1.tensors_mut();
        v.extend(self.hidden2.tensors_mut());
        v.extend(self.output.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Mlp {
            hidden1: self.hidden1.zeros_like(),
            hidden2: self.hidden2.zeros_like(),
            output: self.output.zeros_like(),
        }
    }
}

struct MlpTrace {
    h1: Array2<f64>,
    h2: Array2<f64>,
    logits: Array2<f64>,
}

impl Mlp {
    pub fn random(input: usize, hidden1: usize, hidden2: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            hidden1: Dense::glorot(input, hidden1, rng),
            hidden2: Dense::glorot(hidden1, hidden2, rng),
            output: Dense::glorot(hidden2, 2, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden1.input_dim()
    }

    /// `[input, hidden1, hidden2, 2]`.
    pub fn dims(&self) -> [usize; 4] {
        [
            self.hidden1.input_dim(),
            self.hidden1.output_dim(),
            self.hidden2.output_dim(),
            self.output.output_dim(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let [_, h1, h2, out] = self.dims();
        if self.hidden2.input_dim() != h1 || self.output.input_dim() != h2 {
            return Err(Error::input("MLP layer dimensions do not chain"));
        }
        if out != 2 {
            return Err(Error::input(format!(
                "MLP output width must be 2, got {out}"
            )));
        }
        Ok(())
    }

    fn check_batch(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        self.validate()?;
        self.hidden1.check_input(x.ncols(), "mlp input")
    }

    fn check_stats(&self, stats: &MlpStats) -> Result<()> {
        if stats.hidden1.len() != self.hidden1.output_dim()
            || stats.hidden2.len() != self.hidden2.output_dim()
        {
            return Err(Error::input("MLP stats do not match hidden widths"));
        }
        Ok(())
    }

    /// Stats from this batch, layer by layer.
    pub fn fit_stats(&self, x: ArrayView2<'_, f64>) -> Result<MlpStats> {
        self.check_batch(x)?;
        let a1 = self.hidden1.forward(x);
        let hidden1 = NormStats::fit(a1.view())?;
        let h1 = hidden1.activate(a1.view());
        let hidden2 = NormStats::fit(self.hidden2.forward(h1.view()).view())?;
        Ok(MlpStats { hidden1, hidden2 })
    }

    fn trace(&self, x: ArrayView2<'_, f64>, stats: &MlpStats) -> MlpTrace {
        let h1 = stats.hidden1.activate(self.hidden1.forward(x).view());
        let h2 = stats
            .hidden2
            .activate(self.hidden2.forward(h1.view()).view());
        let logits = self.output.forward(h2.view());
        MlpTrace { h1, h2, logits }
    }

    /// Logits for a batch, `batch × 2`.
    pub fn logits(&self, x: ArrayView2<'_, f64>, stats: &MlpStats) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        self.check_stats(stats)?;
        Ok(self.trace(x, stats).logits)
    }

    /// Softmax probabilities `[p_pos, p_neg]` per row.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>, stats: &MlpStats) -> Result<Vec<[f64; 2]>> {
        Ok(self
            .logits(x, stats)?
            .rows()
            .into_iter()
            .map(|r| softmax([r[POSITIVE], r[NEGATIVE]]))
            .collect())
    }

    /// Mean cross entropy and its gradient, with `stats` held constant.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<'_, f64>,
        labels: &[Label],
        stats: &MlpStats,
    ) -> Result<(f64, Mlp)> {
        self.check_batch(x)?;
        self.check_stats(stats)?;
        if labels.len() != x.nrows() {
            return Err(Error::input("one label per row required"));
        }
        let t = self.trace(x, stats);
        let batch = x.nrows().max(1) as f64;
        let mut loss = 0.0;
        let mut d_logits = Array2::zeros(t.logits.dim());
        for ((row, mut d), &label) in t
            .logits
            .axis_iter(Axis(0))
            .zip(d_logits.axis_iter_mut(Axis(0)))
            .zip(labels)
        {
            let target = class_index(label);
            loss += log_sum_exp(row[0], row[1]) - row[target];
            let p = softmax([row[0], row[1]]);
            for k in 0..2 {
                d[k] = (p[k] - f64::from(u8::from(k == target))) / batch;
            }
        }
        let mut grad = self.zeros_like();
        let mut d_h2 = self
            .output
            .backward(t.h2.view(), d_logits.view(), &mut grad.output, true)
            .expect("input grad");
        stats.hidden2.backward(t.h2.view(), &mut d_h2);
        let mut d_h1 = self
            .hidden2
            .backward(t.h1.view(), d_h2.view(), &mut grad.hidden2, true)
            .expect("input grad");
        stats.hidden1.backward(t.h1.view(), &mut d_h1);
        self.hidden1
            .backward(x, d_h1.view(), &mut grad.hidden1, false);
        Ok((loss / batch, grad))
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Mean softmax cross entropy of a batch.
pub fn cross_entropy(
    mlp: &Mlp,
    x: ArrayView2<'_, f64>,
    labels: &[Label],
    stats: &MlpStats,
) -> Result<f64> {
    if labels.len() != x.nrows() {
        return Err(Error::input("one label per row required"));
    }
    let logits = mlp.logits(x, stats)?;
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, &l)| log_sum_exp(r[0], r[1]) - r[class_index(l)])
        .sum();
    Ok(total / x.nrows().max(1) as f64)
}

pub fn mlp_gradients(
    mlp: &Mlp,
    x: ArrayView2<'_, f64>,
    labels: &[Label],
    stats: &MlpStats,
) -> Result<Mlp> {
    mlp.loss_and_gradients(x, labels, stats).map(|(_, g)| g)
}

/// Logits `[positive, negative]` for one sample.
pub fn mlp_forward(mlp: &Mlp, x: &[f64], stats: &MlpStats) -> Result<[f64; 2]> {
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("shape");
    let l = mlp.logits(xv, stats)?;
    Ok([l[[0, POSITIVE]], l[[0, NEGATIVE]]])
}
