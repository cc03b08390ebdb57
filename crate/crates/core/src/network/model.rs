//! Trained classifier and its JSON serialization.
//!
//! ```json
//! {
//!   "format_version": "fcnet-1",
//!   "layer_dims": [input, hidden1, hidden2, 2],
//!   "layers": [{"weights": [[...], ...], "biases": [...]}, ...],
//!   "norm_stats": [{"min": [...], "max": [...]}, {"min": [...], "max": [...]}],
//!   "class_counts": {"positive": 404, "negative": 424},
//!   "feature_indices": [ ... ]
//! }
//! ```
//!
//! `weights` rows are output nodes. `feature_indices`, when present, maps
//! model inputs to columns of the full feature matrix.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{predict_with_threshold_moving, Dense, Mlp, MlpStats, NormStats};
use crate::data::{write_atomic, ClassCounts, FeatureMatrix, Label};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: &str = "fcnet-1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub mlp: Mlp,
    pub stats: MlpStats,
    /// Training-set class sizes used by threshold moving.
    pub class_counts: ClassCounts,
    pub feature_indices: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: String,
    layer_dims: Vec<usize>,
    layers: Vec<LayerDoc>,
    norm_stats: Vec<NormStats>,
    class_counts: ClassCounts,
    #[serde(default)]
    feature_indices: Option<Vec<usize>>,
}

impl From<&Dense> for LayerDoc {
    fn from(d: &Dense) -> Self {
        LayerDoc {
            weights: d.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            biases: d.biases.to_vec(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::format(0, msg)
}

impl LayerDoc {
    fn into_dense(self, input: usize, output: usize, which: usize) -> Result<Dense> {
        if self.weights.len() != output || self.biases.len() != output {
            return Err(bad(format!(
                "layer {which}: expected {output} output nodes"
            )));
        }
        if self.weights.iter().any(|r| r.len() != input) {
            return Err(bad(format!(
                "layer {which}: expected {input} inputs per row"
            )));
        }
        let flat: Vec<f64> = self.weights.into_iter().flatten().collect();
        let w = Array2::from_shape_vec((output, input), flat).map_err(|e| bad(e.to_string()))?;
        Dense::from_parts(w, Array1::from(self.biases))
            .map_err(|e| bad(format!("layer {which}: {e}")))
    }
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION.into(),
            layer_dims: self.mlp.dims().to_vec(),
            layers: vec![
                (&self.mlp.hidden1).into(),
                (&self.mlp.hidden2).into(),
                (&self.mlp.output).into(),
            ],
            norm_stats: vec![self.stats.hidden1.clone(), self.stats.hidden2.clone()],
            class_counts: self.class_counts,
            feature_indices: self.feature_indices.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| bad(format!("model JSON: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported model format {:?}",
                doc.format_version
            )));
        }
        let dims = doc.layer_dims;
        if dims.len() != 4 || dims[3] != 2 || dims.contains(&0) {
            return Err(bad(
                "layer_dims must be [input, hidden1, hidden2, 2] with non-zero widths",
            ));
        }
        if doc.layers.len() != 3 || doc.norm_stats.len() != 2 {
            return Err(bad("expected 3 layers and 2 normalization-stat blocks"));
        }
        let mut layers = doc.layers.into_iter();
        let mut next = |k: usize| layers.next().unwrap().into_dense(dims[k], dims[k + 1], k);
        let mlp = Mlp {
            hidden1: next(0)?,
            hidden2: next(1)?,
            output: next(2)?,
        };
        let mut stats = doc.norm_stats.into_iter();
        let stats = MlpStats {
            hidden1: stats.next().unwrap(),
            hidden2: stats.next().unwrap(),
        };
        for (k, s) in [&stats.hidden1, &stats.hidden2].into_iter().enumerate() {
            s.validate()
                .map_err(|e| bad(format!("norm_stats[{k}]: {e}")))?;
            if s.len() != dims[k + 1] {
                return Err(bad(format!(
                    "norm_stats[{k}] has {} nodes, expected {}",
                    s.len(),
                    dims[k + 1]
                )));
            }
        }
        if !doc.class_counts.both_present() {
            return Err(bad("class_counts must both be > 0"));
        }
        if let Some(idx) = &doc.feature_indices {
            if idx.len() != dims[0] {
                return Err(bad("feature_indices length must equal the input width"));
            }
        }
        Ok(TrainedModel {
            mlp,
            stats,
            class_counts: doc.class_counts,
            feature_indices: doc.feature_indices,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    /// Model inputs drawn from `fm`, applying `feature_indices` if present.
    pub fn inputs(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        match &self.feature_indices {
            Some(idx) => fm.select_columns(idx),
            None if fm.cols() == self.mlp.input_dim() => Ok(fm.clone()),
            None => Err(Error::input(format!(
                "model expects {} features, input has {}",
                self.mlp.input_dim(),
                fm.cols()
            ))),
        }
    }

    /// `[p_pos, p_neg]` per row of an already-projected input.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Result<Vec<[f64; 2]>> {
        self.mlp.probabilities(x, &self.stats)
    }

    /// Threshold-moved labels and probabilities for an already-projected input.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<(Label, [f64; 2])>> {
        self.probabilities(x)?
            .into_iter()
            .map(|p| Ok((predict_with_threshold_moving(p, self.class_counts)?, p)))
            .collect()
    }
}
