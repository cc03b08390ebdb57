//! `fcnet`: command-line front end for the connectome classification
//! pipeline.
//!
//! Exit codes: 0 success, 2 usage, 3 input or format error, 4 numerical
//! failure, 5 no checkpoint satisfied the training constraint.

mod commands;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use fcnet::feature_selection::SelectionMethod;
use fcnet::training::ConstraintType;

/// Seed used when neither `--seed`, the config file nor `FCNET_SEED` sets one.
pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "FCNET_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "fcnet",
    version,
    about = "Functional-connectivity classification pipeline"
)]
pub struct Cli {
    /// Seed for every random choice. Overrides the config file and FCNET_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a feature matrix from per-subject ROI time-series CSVs.
    Extract(ExtractArgs),
    /// Rank features and write a subset.
    Select(SelectArgs),
    /// Pretrain, transfer and fine-tune one model on an 8:1 train/validation split.
    Train(TrainArgs),
    /// Repeated stratified k-fold cross-validation of the full pipeline.
    Cv(CvArgs),
    /// Compare selection methods over a grid of subset sizes.
    CompareFs(CompareArgs),
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Label a feature matrix with a trained model.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub timeseries_dir: PathBuf,
    /// CSV of `subject_id,label` rows.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output matrix; a `.csv` extension selects the CSV variant.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("rule").required(true).args(["threshold", "top_k", "sweep"])))]
pub struct SelectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_method)]
    pub method: SelectionMethod,
    /// Keep features scoring strictly above this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Keep the K best-ranked features.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Comma-separated thresholds; scores each by cross-validated baseline
    /// accuracy and keeps the best.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Folds used to score sweep thresholds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Subset JSON. The ranking CSV (and sweep CSV) are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Subset JSON from `select`.
    #[arg(long)]
    pub subset: PathBuf,
    /// Training config JSON; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's constraint type.
    #[arg(long, value_parser = parse_constraint)]
    pub constraint: Option<ConstraintType>,
    /// Start the MLP from Glorot weights instead of a pretrained encoder.
    #[arg(long)]
    pub no_pretrain: bool,
    #[arg(long)]
    pub out_model: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_constraint)]
    pub constraint: Option<ConstraintType>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Folds trained in parallel; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub no_pretrain: bool,
    /// Report JSON; fold, ROC and DET CSVs are written beside it.
    #[arg(long)]
    pub out_report: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "dsdc,fisher,abs_pcc")]
    pub methods: Vec<SelectionMethod>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k_grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Summary CSV; per-fold accuracies go to a JSON file beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Gaussian features with a planted mean shift.
    Features(SynthFeaturesArgs),
    /// ROI time series with class-dependent coupling, plus a label manifest.
    Timeseries(SynthTimeseriesArgs),
}

#[derive(Debug, Args)]
pub struct SynthFeaturesArgs {
    #[arg(long)]
    pub num_features: usize,
    #[arg(long)]
    pub planted: usize,
    /// Distance between the class means of each planted feature.
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Overrides `--per-class` for the positive class.
    #[arg(long)]
    pub positives: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthTimeseriesArgs {
    #[arg(long)]
    pub subjects: usize,
    #[arg(long)]
    pub rois: usize,
    #[arg(long, default_value_t = 120)]
    pub timepoints: usize,
    /// Comma-separated `source-target` ROI pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair, default_value = "0-1")]
    pub coupled_pairs: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0.6)]
    pub positive_coupling: f64,
    #[arg(long, default_value_t = 0.0)]
    pub negative_coupling: f64,
    /// Output directory; series go to `series/`, labels to `labels.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// CSV of `row,label,p_positive`.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> Result<SelectionMethod, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = SelectionMethod::ALL.iter().map(|m| m.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_constraint(s: &str) -> Result<ConstraintType, String> {
    s.parse()
        .map_err(|_| "expected one of none, 1, 2, balanced".to_string())
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or("expected source-target")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((parse(a)?, parse(b)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
