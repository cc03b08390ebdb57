//! Synthetic data with known ground truth.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::rng::CounterNormal;
use super::{FeatureMatrix, Label};
use crate::connectome::{LabeledSeries, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::seeds;

/// Mean-shift generator: every feature is `noise_std · N(0,1)`, planted
/// features additionally get `+Δ/2` for positives and `−Δ/2` for negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_features: usize,
    pub planted_indices: Vec<usize>,
    pub mean_shift: f64,
    pub positives: usize,
    pub negatives: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Balanced classes with `planted` feature indices chosen by the seed.
    pub fn new(
        num_features: usize,
        planted: usize,
        mean_shift: f64,
        samples_per_class: usize,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            num_features,
            planted_indices: choose_planted(num_features, planted, seed),
            mean_shift,
            positives: samples_per_class,
            negatives: samples_per_class,
            noise_std: 1.0,
            seed,
        }
    }

    pub fn with_class_sizes(mut self, positives: usize, negatives: usize) -> Self {
        self.positives = positives;
        self.negatives = negatives;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&bad) = self
            .planted_indices
            .iter()
            .find(|&&i| i >= self.num_features)
        {
            return Err(Error::input(format!(
                "planted index {bad} outside [0, {})",
                self.num_features
            )));
        }
        if !(self.mean_shift >= 0.0) || !self.mean_shift.is_finite() {
            return Err(Error::input("mean shift must be finite and >= 0"));
        }
        if !(self.noise_std > 0.0) || !self.noise_std.is_finite() {
            return Err(Error::input("noise_std must be finite and > 0"));
        }
        Ok(())
    }
}

/// A seeded sample of `count` distinct indices from `0..n`, sorted.
fn choose_planted(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let g = CounterNormal::new(seed, u64::MAX);
    // Partial Fisher–Yates driven by the counter stream.
    let mut idx: Vec<usize> = (0..n).collect();
    let count = count.min(n);
    for i in 0..count {
        let j = i + (g.uniform(i as u64) * (n - i) as f64) as usize;
        idx.swap(i, j.min(n - 1));
    }
    let mut out = idx[..count].to_vec();
    out.sort_unstable();
    out
}

/// Positives occupy the first `positives` rows, negatives the rest.
/// Cell (r, c) uses counter `r · num_features + c` of stream 0.
pub fn synth_features(spec: &SyntheticSpec) -> Result<FeatureMatrix> {
    spec.validate()?;
    let rows = spec.positives + spec.negatives;
    let cols = spec.num_features;
    let g = CounterNormal::new(spec.seed, 0);
    let mut shift = vec![0.0; cols];
    for &i in &spec.planted_indices {
        shift[i] = spec.mean_shift / 2.0;
    }
    let labels: Vec<Label> = (0..rows)
        .map(|r| {
            if r < spec.positives {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let values = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let sign = if labels[r].is_positive() { 1.0 } else { -1.0 };
        sign * shift[c] + spec.noise_std * g.normal((r * cols + c) as u64)
    });
    let provenance = serde_json::json!({
        "generator": "synth_features",
        "spec": spec,
    });
    Ok(FeatureMatrix::new(values, labels)?.with_provenance(provenance))
}

/// Class-dependent coupling for [`synth_timeseries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    /// Number of shared sinusoidal components.
    pub components: usize,
    /// Amplitude of the shared sinusoid mixture; 0 disables it.
    pub shared_amplitude: f64,
    pub noise_std: f64,
    /// ROI pairs `(source, target)` whose signals are mixed.
    pub coupled_pairs: Vec<(usize, usize)>,
    /// Mixing weight in [0, 1] for positive subjects; 1 copies the source.
    pub positive_coupling: f64,
    pub negative_coupling: f64,
}

impl Default for CouplingSpec {
    fn default() -> Self {
        CouplingSpec {
            components: 3,
            shared_amplitude: 1.0,
            noise_std: 1.0,
            coupled_pairs: vec![(0, 1)],
            positive_coupling: 0.6,
            negative_coupling: 0.0,
        }
    }
}

/// ROI signals are a seeded mixture of shared sinusoids plus independent
/// noise; for each coupled pair the target becomes
/// `(1 − c)·target + c·source` with `c` chosen by class. Subjects alternate
/// labels starting with a positive.
pub fn synth_timeseries(
    num_subjects: usize,
    num_rois: usize,
    num_timepoints: usize,
    coupling: &CouplingSpec,
    seed: u64,
) -> Result<Vec<LabeledSeries>> {
    if num_rois < 2 || num_timepoints < 3 {
        return Err(Error::input("need at least 2 ROIs and 3 timepoints"));
    }
    if let Some(&(a, b)) = coupling
        .coupled_pairs
        .iter()
        .find(|&&(a, b)| a >= num_rois || b >= num_rois || a == b)
    {
        return Err(Error::input(format!("bad coupled pair ({a}, {b})")));
    }
    (0..num_subjects)
        .map(|s| {
            let label = if s % 2 == 0 {
                Label::Positive
            } else {
                Label::Negative
            };
            let g = CounterNormal::new(seeds::derive(seed, &[s as u64]), 0);
            let mut counter = 0u64;
            let mut next = || {
                counter += 1;
                g.normal(counter - 1)
            };
            let phases: Vec<f64> = (0..coupling.components)
                .map(|_| next() * std::f64::consts::PI)
                .collect();
            let mut series = Array2::zeros((num_rois, num_timepoints));
            for r in 0..num_rois {
                let weights: Vec<f64> = (0..coupling.components).map(|_| next()).collect();
                for t in 0..num_timepoints {
                    let phase = std::f64::consts::TAU * t as f64 / num_timepoints as f64;
                    let shared: f64 = weights
                        .iter()
                        .zip(&phases)
                        .enumerate()
                        .map(|(k, (w, p))| w * ((k + 1) as f64 * phase + p).sin())
                        .sum();
                    series[[r, t]] =
                        coupling.shared_amplitude * shared + coupling.noise_std * next();
                }
            }
            let c = if label.is_positive() {
                coupling.positive_coupling
            } else {
                coupling.negative_coupling
            };
            for &(src, dst) in &coupling.coupled_pairs {
                for t in 0..num_timepoints {
                    series[[dst, t]] = (1.0 - c) * series[[dst, t]] + c * series[[src, t]];
                }
            }
            Ok(LabeledSeries {
                series: TimeSeriesMatrix::new(format!("sub{s:04}"), series)?,
                label,
            })
        })
        .collect()
}
