//! Feature matrices, file formats and synthetic data.

mod file;
mod io;
pub mod rng;
pub mod synth;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{
    feature_matrix_csv_bytes, feature_matrix_file_len, load_feature_matrix,
    load_feature_matrix_csv, read_feature_matrix, save_feature_matrix, save_feature_matrix_csv,
    write_feature_matrix, HEADER_LEN, MAGIC, VERSION,
};
pub use io::{load_subject_manifest, load_timeseries_csv, load_timeseries_dir, write_atomic};
pub use synth::{synth_features, synth_timeseries, CouplingSpec, SyntheticSpec};

/// Binary class. `Positive` is the patient (ASD-analog) class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

/// Per-class sample counts. Threshold moving uses the training-set counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn of(labels: &[Label]) -> Self {
        let positive = labels.iter().filter(|l| l.is_positive()).count();
        ClassCounts {
            positive,
            negative: labels.len() - positive,
        }
    }

    pub fn total(&self) -> usize {
        self.positive + self.negative
    }

    pub fn both_present(&self) -> bool {
        self.positive > 0 && self.negative > 0
    }
}

/// Subjects × features table with one binary label per subject.
///
/// Values are held as `f64` in memory; the binary file format stores `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    labels: Vec<Label>,
    provenance: Option<serde_json::Value>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        if values.nrows() != labels.len() {
            return Err(Error::input(format!(
                "feature matrix has {} rows but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        Ok(FeatureMatrix {
            values: values.as_standard_layout().into_owned(),
            labels,
            provenance: None,
        })
    }

    /// An empty matrix that still records its feature count.
    pub fn empty(cols: usize) -> Self {
        FeatureMatrix {
            values: Array2::zeros((0, cols)),
            labels: Vec::new(),
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::of(&self.labels)
    }

    /// Rows in the given order. Panics on out-of-range indices.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<FeatureMatrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols()) {
            return Err(Error::input(format!(
                "feature index {bad} out of range for {} features",
                self.cols()
            )));
        }
        Ok(FeatureMatrix {
            values: self.values.select(Axis(1), cols),
            labels: self.labels.clone(),
            provenance: self.provenance.clone(),
        })
    }
}
