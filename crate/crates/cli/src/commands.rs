use std::collections::BTreeMap;
use std::path::Path;

use fcnet::connectome::{FeatureExtractor, LabeledSeries};
use fcnet::data::{
    feature_matrix_csv_bytes, load_feature_matrix, load_feature_matrix_csv, load_subject_manifest,
    load_timeseries_dir, synth_features, synth_timeseries, write_feature_matrix, CouplingSpec,
    FeatureMatrix, SyntheticSpec,
};
use fcnet::evaluation::{
    compare_feature_selection, run_cv, threshold_cv_accuracy, train_validation_split, CvOptions,
};
use fcnet::feature_selection::{
    rank_features, select_by_threshold, select_top_k, threshold_sweep, FeatureSubset,
};
use fcnet::format::sig17;
use fcnet::network::TrainedModel;
use fcnet::training::{train_classifier, TrainingConfig};
use fcnet::Error;
use thiserror::Error as ThisError;

use crate::manifest::RunManifest;
use crate::output::{sibling, Outputs};
use crate::{
    Cli, Command, CompareArgs, CvArgs, ExtractArgs, PredictArgs, SelectArgs, SynthCommand,
    SynthFeaturesArgs, SynthTimeseriesArgs, TrainArgs, DEFAULT_SEED, SEED_ENV,
};

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                Error::NonFinite { .. } => 4,
                Error::ConstraintNeverSatisfied { .. } => 5,
                _ => 3,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Select(a) => select(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Cv(a) => cv(a, seed),
        Command::CompareFs(a) => compare_fs(a, seed),
        Command::Synth(SynthCommand::Features(a)) => synth_feature_matrix(a, seed),
        Command::Synth(SynthCommand::Timeseries(a)) => synth_series(a, seed),
        Command::Predict(a) => predict(a),
    }
}

/// Flag first, then the config file, then `FCNET_SEED`, then the default.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_matrix(path: &Path) -> fcnet::Result<FeatureMatrix> {
    if is_csv(path) {
        load_feature_matrix_csv(path)
    } else {
        load_feature_matrix(path)
    }
}

fn encode_matrix(fm: &FeatureMatrix, path: &Path) -> fcnet::Result<Vec<u8>> {
    if is_csv(path) {
        feature_matrix_csv_bytes(fm)
    } else {
        let mut buf = Vec::new();
        write_feature_matrix(fm, &mut buf)?;
        Ok(buf)
    }
}

fn load_config(path: Option<&Path>) -> fcnet::Result<TrainingConfig> {
    match path {
        Some(p) => TrainingConfig::load(p),
        None => Ok(TrainingConfig::default()),
    }
}

fn load_subset(path: &Path, num_features: usize) -> fcnet::Result<FeatureSubset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let subset: FeatureSubset = serde_json::from_str(&text)
        .map_err(|e| Error::input(format!("subset {}: {e}", path.display())))?;
    subset.validate(num_features)?;
    if subset.is_empty() {
        return Err(Error::input(format!(
            "subset {} selects no features",
            path.display()
        )));
    }
    Ok(subset)
}

fn json<T: serde::Serialize>(value: &T) -> fcnet::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn extract(a: ExtractArgs) -> Result<()> {
    let mut m = RunManifest::new("extract");
    let labels = load_subject_manifest(&a.manifest)?;
    m.input(&a.manifest)?;
    let series = load_timeseries_dir(&a.timeseries_dir)?;
    let missing: Vec<&str> = series
        .iter()
        .map(|s| s.subject_id())
        .filter(|id| !labels.contains_key(*id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::input(format!(
            "subjects missing from manifest {}: {}",
            a.manifest.display(),
            missing.join(", ")
        ))
        .into());
    }
    for s in &series {
        m.input(&a.timeseries_dir.join(format!("{}.csv", s.subject_id())))?;
    }
    let dataset: Vec<LabeledSeries> = series
        .into_iter()
        .map(|series| {
            let label = labels[series.subject_id()];
            LabeledSeries { series, label }
        })
        .collect();
    let extractor = FeatureExtractor::new(dataset[0].series.num_rois());
    let (fm, diag) = m.time("extract", || extractor.extract(&dataset))?;
    m.summary = serde_json::json!({
        "subjects": fm.rows(),
        "features": fm.cols(),
        "degenerate_pairs": diag.degenerate_pairs(),
        "diagnostics": diag,
    });
    let mut out = Outputs::default();
    out.add(&a.out, encode_matrix(&fm, &a.out)?);
    m.finish(out, sibling(&a.out, "manifest.json"))?;
    Ok(())
}

fn select(a: SelectArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("select");
    let fm = load_matrix(&a.input)?;
    m.input(&a.input)?;
    let ranking = m.time("rank", || rank_features(&fm, a.method))?;
    let mut out = Outputs::default();
    let subset = if let Some(t) = a.threshold {
        select_by_threshold(&ranking, t)
    } else if let Some(k) = a.top_k {
        select_top_k(&ranking, k)?
    } else {
        let thresholds = a.sweep.unwrap_or_default();
        let seed = resolve_seed(seed, None)?;
        m.seed = Some(seed);
        let report = m.time("sweep", || {
            threshold_sweep(&ranking, &thresholds, |s| {
                let t = s
                    .provenance
                    .threshold
                    .expect("sweep subsets carry a threshold");
                threshold_cv_accuracy(&fm, a.method, t, a.folds, seed)
            })
        })?;
        out.add(sibling(&a.out, "sweep.csv"), report.to_csv());
        m.summary = serde_json::json!({ "best_threshold": report.best_threshold() });
        select_by_threshold(&ranking, report.best_threshold())
    };
    out.add(&a.out, json(&subset)?);
    out.add(sibling(&a.out, "ranking.csv"), ranking.to_csv());
    m.finish(out, sibling(&a.out, "manifest.json"))?;
    Ok(())
}

fn train(a: TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("train");
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(c) = a.constraint {
        cfg.constraint_type = c;
    }
    let fm = load_matrix(&a.input)?;
    m.input(&a.input)?;
    let subset = load_subset(&a.subset, fm.cols())?;
    m.input(&a.subset)?;
    if let Some(c) = &a.config {
        m.input(c)?;
    }
    let seed = resolve_seed(seed, cfg.seed)?;
    m.seed = Some(seed);
    m.config = Some(serde_json::to_value(&cfg).map_err(Error::from)?);

    let cols = &subset.selected_indices;
    let split = train_validation_split(fm.labels(), seed)?;
    let train_set = fm.select_rows(&split.train).select_columns(cols)?;
    let val_set = fm.select_rows(&split.validation).select_columns(cols)?;
    let outcome = m.time("train", || {
        train_classifier(&train_set, &val_set, &cfg, seed, !a.no_pretrain)
    })?;
    let mut model = outcome.fine_tune.model;
    model.feature_indices = Some(cols.clone());
    let saved = &outcome.fine_tune.history[outcome.fine_tune.saved_epoch];
    m.summary = serde_json::json!({
        "train_rows": split.train,
        "validation_rows": split.validation,
        "saved_epoch": outcome.fine_tune.saved_epoch,
        "epochs_run": outcome.fine_tune.history.len(),
        "validation": saved.validation,
        "pretrain_loss": outcome.pretrain_loss,
        "history": outcome.fine_tune.history,
    });
    let mut out = Outputs::default();
    out.add(&a.out_model, model.to_json()?);
    m.finish(out, sibling(&a.out_model, "manifest.json"))?;
    Ok(())
}

fn cv(a: CvArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("cv");
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(c) = a.constraint {
        cfg.constraint_type = c;
    }
    let fm = load_matrix(&a.input)?;
    m.input(&a.input)?;
    if let Some(c) = &a.config {
        m.input(c)?;
    }
    let seed = resolve_seed(seed, cfg.seed)?;
    m.seed = Some(seed);
    m.config = Some(serde_json::to_value(&cfg).map_err(Error::from)?);
    let opts = CvOptions {
        repeats: a.repeats,
        folds: a.folds,
        pretrain: !a.no_pretrain,
    };
    let report = with_jobs(a.jobs, || m.time("cv", || run_cv(&fm, &cfg, opts, seed)))??;
    for f in &report.folds {
        m.timings.push(crate::manifest::StageTiming {
            stage: format!("repeat {} fold {}", f.repeat, f.fold),
            seconds: f.training_seconds,
        });
    }
    m.summary = serde_json::json!({
        "mean_accuracy": report.mean_accuracy,
        "mean_sensitivity": report.mean_sensitivity,
        "mean_specificity": report.mean_specificity,
        "mean_auc": report.mean_auc,
        "best_fold": report.best_fold,
        "worst_fold": report.worst_fold,
    });
    // Timings live in the manifest so the report depends only on the seed.
    let report = report.without_timings();
    let mut out = Outputs::default();
    out.add(&a.out_report, report.to_json()?);
    out.add(sibling(&a.out_report, "folds.csv"), report.folds_csv());
    out.add(sibling(&a.out_report, "roc.csv"), report.roc_csv());
    out.add(sibling(&a.out_report, "det.csv"), report.det_csv());
    m.finish(out, sibling(&a.out_report, "manifest.json"))?;
    Ok(())
}

fn compare_fs(a: CompareArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("compare-fs");
    let fm = load_matrix(&a.input)?;
    m.input(&a.input)?;
    let seed = resolve_seed(seed, None)?;
    m.seed = Some(seed);
    let report = with_jobs(a.jobs, || {
        m.time("compare", || {
            compare_feature_selection(&fm, &a.methods, &a.k_grid, a.folds, seed)
        })
    })??;
    let mut out = Outputs::default();
    out.add(&a.out, report.to_csv());
    out.add(sibling(&a.out, "json"), json(&report)?);
    m.finish(out, sibling(&a.out, "manifest.json"))?;
    Ok(())
}

fn synth_feature_matrix(a: SynthFeaturesArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("synth features");
    let seed = resolve_seed(seed, None)?;
    m.seed = Some(seed);
    if a.planted > a.num_features {
        return Err(CliError::Usage(format!(
            "--planted {} exceeds --num-features {}",
            a.planted, a.num_features
        )));
    }
    let mut spec = SyntheticSpec::new(a.num_features, a.planted, a.delta, a.per_class, seed)
        .with_class_sizes(
            a.positives.unwrap_or(a.per_class),
            a.negatives.unwrap_or(a.per_class),
        );
    spec.noise_std = a.noise_std;
    let fm = m.time("generate", || synth_features(&spec))?;
    m.summary = serde_json::json!({ "spec": spec });
    let mut out = Outputs::default();
    out.add(&a.out, encode_matrix(&fm, &a.out)?);
    m.finish(out, sibling(&a.out, "manifest.json"))?;
    Ok(())
}

fn synth_series(a: SynthTimeseriesArgs, seed: Option<u64>) -> Result<()> {
    let mut m = RunManifest::new("synth timeseries");
    let seed = resolve_seed(seed, None)?;
    m.seed = Some(seed);
    let coupling = CouplingSpec {
        coupled_pairs: a.coupled_pairs.clone(),
        positive_coupling: a.positive_coupling,
        negative_coupling: a.negative_coupling,
        ..CouplingSpec::default()
    };
    let subjects = m.time("generate", || {
        synth_timeseries(a.subjects, a.rois, a.timepoints, &coupling, seed)
    })?;
    let mut out = Outputs::default();
    let mut labels = String::from("subject_id,label\n");
    for s in &subjects {
        let id = s.series.subject_id();
        let mut text = String::new();
        for row in s.series.series().rows() {
            let cells: Vec<String> = row.iter().map(|v| sig17(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        out.add(a.out.join("series").join(format!("{id}.csv")), text);
        labels.push_str(&format!("{id},{}\n", s.label.as_u8()));
    }
    out.add(a.out.join("labels.csv"), labels);
    m.summary = serde_json::json!({ "coupling": coupling, "subjects": a.subjects });
    m.finish(out, a.out.join("manifest.json"))?;
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let mut m = RunManifest::new("predict");
    let model = TrainedModel::load(&a.model)?;
    m.input(&a.model)?;
    let fm = load_matrix(&a.input)?;
    m.input(&a.input)?;
    let x = model.inputs(&fm)?;
    let predictions = m.time("predict", || model.predict(x.values().view()))?;
    let mut text = String::from("row,label,p_positive\n");
    let mut counts = BTreeMap::new();
    for (i, (label, p)) in predictions.iter().enumerate() {
        text.push_str(&format!(
            "{i},{},{}\n",
            label.as_u8(),
            sig17(p[fcnet::network::POSITIVE])
        ));
        *counts.entry(label.as_u8()).or_insert(0usize) += 1;
    }
    m.summary = serde_json::json!({ "predicted_counts": counts });
    let mut out = Outputs::default();
    out.add(&a.out, text);
    m.finish(out, sibling(&a.out, "manifest.json"))?;
    Ok(())
}
