//! Functional-connectivity classification pipeline.
//!
//! The crate covers the whole path from ROI time series to a trained,
//! evaluated classifier:
//!
//! - [`connectome`]: Pearson connectivity matrices flattened into feature vectors.
//! - [`feature_selection`]: DSDC step-distribution scoring, Fisher score and
//!   absolute label correlation, ranking and subset selection.
//! - [`network`]: the simplified VAE, the MLP with the normalization plus
//!   modified-tanh activation, softmax, threshold moving and analytic gradients.
//! - [`training`]: RMSProp, VAE pretraining, encoder transfer, fine-tuning with
//!   constraint-gated checkpointing.
//! - [`evaluation`]: stratified splits, repeated cross-validation, metrics,
//!   ROC/DET/AUC, Welch's t-test and a linear baseline classifier.
//! - [`data`]: feature-matrix files, CSV ingestion and synthetic generators.

pub mod connectome;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod feature_selection;
pub mod format;
pub mod network;
pub mod seeds;
pub mod training;

pub use data::{FeatureMatrix, Label};
pub use error::{Error, Result};
