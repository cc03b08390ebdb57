use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::network::Dense;
use crate::training::{rmsprop_step, OptimizerState, RmsProp};

/// Settings of the logistic baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the full-batch gradient norm drops below this.
    pub gradient_tolerance: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            learning_rate: 1e-2,
            max_epochs: 2000,
            gradient_tolerance: 1e-6,
        }
    }
}

/// Logistic regression on standardized features, trained full-batch with
/// RMSProp from zero weights. Training is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    mean: Array1<f64>,
    scale: Array1<f64>,
    layer: Dense,
    pub epochs: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LinearBaseline {
    pub fn fit(train: &FeatureMatrix, opts: BaselineOptions) -> Result<Self> {
        if !train.class_counts().both_present() {
            return Err(Error::input("baseline training needs both classes"));
        }
        let x = train.values();
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x
            .var_axis(Axis(0), 0.0)
            .mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        let z = (x - &mean) / &scale;
        let y = Array1::from_iter(train.labels().iter().map(|l| l.as_f64()));
        let mut layer = Dense::zeros(x.ncols(), 1);
        let mut state = OptimizerState::new(&layer);
        let rms = RmsProp {
            learning_rate: opts.learning_rate,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut epochs = 0;
        while epochs < opts.max_epochs {
            let logits = layer.forward(z.view()).column(0).to_owned();
            let resid = logits.mapv(sigmoid) - &y;
            let gw = z.t().dot(&resid) / n;
            let gb = resid.sum() / n;
            let norm = (gw.dot(&gw) + gb * gb).sqrt();
            if norm < opts.gradient_tolerance {
                break;
            }
            let grad = Dense::from_parts(gw.insert_axis(Axis(0)), Array1::from(vec![gb]))?;
            rmsprop_step(&mut layer, &grad, &mut state, rms)?;
            epochs += 1;
        }
        Ok(LinearBaseline {
            mean,
            scale,
            layer,
            epochs,
        })
    }

    /// `P(positive)` per row.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::input(format!(
                "baseline expects {} features, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let z: Array2<f64> = (&x - &self.mean) / &self.scale;
        Ok(self
            .layer
            .forward(z.view())
            .column(0)
            .mapv(sigmoid)
            .to_vec())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Label>> {
        Ok(self
            .probabilities(x)?
            .into_iter()
            .map(|p| {
                if p > 0.5 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect())
    }
}

/// Fits on `train` with default options and labels every row of `test`.
pub fn linear_baseline(train: &FeatureMatrix, test: &FeatureMatrix) -> Result<Vec<Label>> {
    LinearBaseline::fit(train, BaselineOptions::default())?.predict(test.values().view())
}
