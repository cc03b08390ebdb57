//! Filter feature selection: DSDC, Fisher score and absolute label correlation.
//!
//! DSDC approximates each class-conditional feature distribution by a
//! normalized histogram over `bin_count` equal-width bins spanning the
//! feature's observed range, and scores the feature by the L1 distance
//! between the two class histograms. Bins are half-open `[e_i, e_{i+1})`
//! except the last, which also holds the maximum.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectome::pearson;
use crate::data::{ClassCounts, FeatureMatrix, Label};
use crate::error::{Error, Result};
use crate::format::sig17;

pub const DEFAULT_BIN_COUNT: usize = 20;

/// Class-conditional step distributions of one feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDistributionPair {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub bin_width: f64,
    pub bin_count: usize,
    pub pos_counts: Vec<usize>,
    pub neg_counts: Vec<usize>,
    pub pos_total: usize,
    pub neg_total: usize,
}

impl StepDistributionPair {
    /// Per-bin heights `n_i / N` for the positive and negative class.
    pub fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let norm = |c: &[usize], t: usize| c.iter().map(|&n| n as f64 / t as f64).collect();
        (
            norm(&self.pos_counts, self.pos_total),
            norm(&self.neg_counts, self.neg_total),
        )
    }
}

fn check_labels(len: usize, labels: &[Label]) -> Result<ClassCounts> {
    if len != labels.len() {
        return Err(Error::input(format!(
            "{len} values but {} labels",
            labels.len()
        )));
    }
    let counts = ClassCounts::of(labels);
    if !counts.both_present() {
        return Err(Error::input("both classes must be present"));
    }
    Ok(counts)
}

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width).floor() as usize).min(bins - 1)
}

pub fn build_step_distributions(
    values: &[f64],
    labels: &[Label],
    bin_count: usize,
) -> Result<StepDistributionPair> {
    let counts = check_labels(values.len(), labels)?;
    if bin_count == 0 {
        return Err(Error::input("bin_count must be >= 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature values must be finite"));
    }
    Ok(step_distributions_unchecked(
        values, labels, bin_count, counts,
    ))
}

fn step_distributions_unchecked(
    values: &[f64],
    labels: &[Label],
    bin_count: usize,
    counts: ClassCounts,
) -> StepDistributionPair {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    // A constant feature collapses to one bin holding everything.
    let bins = if hi > lo { bin_count } else { 1 };
    let width = (hi - lo) / bins as f64;
    let mut pos_counts = vec![0; bins];
    let mut neg_counts = vec![0; bins];
    for (&v, l) in values.iter().zip(labels) {
        let b = if bins == 1 {
            0
        } else {
            bin_of(v, lo, width, bins)
        };
        if l.is_positive() {
            pos_counts[b] += 1;
        } else {
            neg_counts[b] += 1;
        }
    }
    StepDistributionPair {
        lower_bound: lo,
        upper_bound: hi,
        bin_width: width,
        bin_count: bins,
        pos_counts,
        neg_counts,
        pos_total: counts.positive,
        neg_total: counts.negative,
    }
}

/// Σ_i |n_i⁺/N⁺ − n_i⁻/N⁻|, in [0, 2].
pub fn dsdc_score(dist: &StepDistributionPair) -> Result<f64> {
    if dist.pos_total == 0 || dist.neg_total == 0 {
        return Err(Error::input("DSDC needs non-empty classes"));
    }
    let (np, nn) = (dist.pos_total as f64, dist.neg_total as f64);
    Ok(dist
        .pos_counts
        .iter()
        .zip(&dist.neg_counts)
        .map(|(&p, &n)| (p as f64 / np - n as f64 / nn).abs())
        .sum())
}

/// `((x̄⁺−x̄)² + (x̄⁻−x̄)²) / (s⁺² + s⁻²)` with unbiased class variances.
///
/// A zero denominator gives `+∞` when the class means differ and 0 otherwise.
pub fn fisher_score(values: &[f64], labels: &[Label]) -> Result<f64> {
    let counts = check_labels(values.len(), labels)?;
    if counts.positive < 2 || counts.negative < 2 {
        return Err(Error::input("Fisher score needs >= 2 samples per class"));
    }
    Ok(fisher_unchecked(values, labels, counts))
}

fn fisher_unchecked(values: &[f64], labels: &[Label], counts: ClassCounts) -> f64 {
    let class_values = |pos: bool| {
        values
            .iter()
            .zip(labels)
            .filter(move |(_, l)| l.is_positive() == pos)
            .map(|(v, _)| *v)
    };
    let mean = |it: &mut dyn Iterator<Item = f64>, n: usize| it.sum::<f64>() / n as f64;
    let var = |pos: bool, m: f64, n: usize| {
        class_values(pos).map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
    };
    let m_all = values.iter().sum::<f64>() / values.len() as f64;
    let m_pos = mean(&mut class_values(true), counts.positive);
    let m_neg = mean(&mut class_values(false), counts.negative);
    let num = (m_pos - m_all).powi(2) + (m_neg - m_all).powi(2);
    let den = var(true, m_pos, counts.positive) + var(false, m_neg, counts.negative);
    if den == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        num / den
    }
}

/// |PCC(values, labels as 0/1)|; constant values score 0.
pub fn abs_pcc_score(values: &[f64], labels: &[Label]) -> Result<f64> {
    check_labels(values.len(), labels)?;
    let y: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
    match pearson(values, &y) {
        Ok(r) => Ok(r.abs()),
        Err(Error::Degenerate(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Dsdc,
    Fisher,
    AbsPcc,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 3] = [
        SelectionMethod::Dsdc,
        SelectionMethod::Fisher,
        SelectionMethod::AbsPcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Dsdc => "dsdc",
            SelectionMethod::Fisher => "fisher",
            SelectionMethod::AbsPcc => "abs_pcc",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::input(format!("unknown selection method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRanking {
    pub method: SelectionMethod,
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub order: Vec<usize>,
    /// Constant features (scored 0 under DSDC and |PCC|).
    pub degenerate_features: usize,
}

impl FeatureRanking {
    pub fn from_scores(
        method: SelectionMethod,
        scores: Vec<f64>,
        degenerate_features: usize,
    ) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        FeatureRanking {
            method,
            scores,
            order,
            degenerate_features,
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// CSV `feature_index,score,rank` in ranking order, rank starting at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_index,score,rank\n");
        for (rank, &i) in self.order.iter().enumerate() {
            out.push_str(&format!("{i},{},{}\n", sig17(self.scores[i]), rank + 1));
        }
        out
    }
}

const SCORE_BLOCK: usize = 64;

/// Scores every column of `fm`. Columns are scored in parallel blocks; each
/// score is computed exactly as the sequential per-feature function would.
pub fn rank_features(fm: &FeatureMatrix, method: SelectionMethod) -> Result<FeatureRanking> {
    rank_features_with_bins(fm, method, DEFAULT_BIN_COUNT)
}

pub fn rank_features_with_bins(
    fm: &FeatureMatrix,
    method: SelectionMethod,
    bin_count: usize,
) -> Result<FeatureRanking> {
    let labels = fm.labels();
    let counts = check_labels(fm.rows(), labels)?;
    if method == SelectionMethod::Fisher && (counts.positive < 2 || counts.negative < 2) {
        return Err(Error::input("Fisher score needs >= 2 samples per class"));
    }
    if bin_count == 0 {
        return Err(Error::input("bin_count must be >= 1"));
    }
    if fm.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("feature values must be finite"));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
    let values = fm.values();
    let cols = fm.cols();
    let blocks: Vec<(Vec<f64>, usize)> = (0..cols.div_ceil(SCORE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let (j0, j1) = (b * SCORE_BLOCK, ((b + 1) * SCORE_BLOCK).min(cols));
            let width = j1 - j0;
            // Gather the block column-major so each feature is contiguous.
            let mut block = vec![0.0; width * fm.rows()];
            for (r, row) in values.rows().into_iter().enumerate() {
                for (k, v) in row.iter().skip(j0).take(width).enumerate() {
                    block[k * fm.rows() + r] = *v;
                }
            }
            let mut degenerate = 0;
            let scores = block
                .chunks_exact(fm.rows().max(1))
                .take(width)
                .map(|col| {
                    let constant = col.iter().all(|v| *v == col[0]);
                    degenerate += usize::from(constant);
                    match method {
                        SelectionMethod::Dsdc => {
                            let d = step_distributions_unchecked(col, labels, bin_count, counts);
                            dsdc_score(&d).expect("class totals checked")
                        }
                        SelectionMethod::Fisher => fisher_unchecked(col, labels, counts),
                        SelectionMethod::AbsPcc => {
                            if constant {
                                0.0
                            } else {
                                pearson(col, &y).map(f64::abs).unwrap_or(0.0)
                            }
                        }
                    }
                })
                .collect();
            (scores, degenerate)
        })
        .collect();
    let degenerate = blocks.iter().map(|(_, d)| d).sum();
    let scores = blocks.into_iter().flat_map(|(s, _)| s).collect();
    Ok(FeatureRanking::from_scores(method, scores, degenerate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetProvenance {
    pub method: SelectionMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    pub num_features: usize,
    pub empty: bool,
}

/// Selected feature indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub selected_indices: Vec<usize>,
    pub provenance: SubsetProvenance,
}

impl FeatureSubset {
    pub fn len(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_indices.is_empty()
    }

    pub fn validate(&self, num_features: usize) -> Result<()> {
        let ascending = self.selected_indices.windows(2).all(|w| w[0] < w[1]);
        if !ascending {
            return Err(Error::input("subset indices must be strictly ascending"));
        }
        match self.selected_indices.last() {
            Some(&last) if last >= num_features => Err(Error::input(format!(
                "subset index {last} out of range for {num_features} features"
            ))),
            _ => Ok(()),
        }
    }
}

/// Features with score strictly greater than `threshold`.
pub fn select_by_threshold(r: &FeatureRanking, threshold: f64) -> FeatureSubset {
    let selected_indices: Vec<usize> = (0..r.len()).filter(|&i| r.scores[i] > threshold).collect();
    FeatureSubset {
        provenance: SubsetProvenance {
            method: r.method,
            threshold: Some(threshold),
            k: None,
            num_features: r.len(),
            empty: selected_indices.is_empty(),
        },
        selected_indices,
    }
}

/// The `k` best-ranked features, returned in ascending index order.
pub fn select_top_k(r: &FeatureRanking, k: usize) -> Result<FeatureSubset> {
    if k > r.len() {
        return Err(Error::input(format!(
            "k = {k} exceeds feature count {}",
            r.len()
        )));
    }
    let mut selected_indices = r.order[..k].to_vec();
    selected_indices.sort_unstable();
    Ok(FeatureSubset {
        provenance: SubsetProvenance {
            method: r.method,
            threshold: None,
            k: Some(k),
            num_features: r.len(),
            empty: k == 0,
        },
        selected_indices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub subset_size: usize,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub method: SelectionMethod,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the chosen threshold.
    pub best: usize,
}

impl SweepReport {
    pub fn best_threshold(&self) -> f64 {
        self.rows[self.best].threshold
    }

    /// CSV `threshold,subset_size,mean_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,subset_size,mean_accuracy\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                sig17(row.threshold),
                row.subset_size,
                sig17(row.mean_accuracy)
            ));
        }
        out
    }
}

/// Evaluates the subset induced by each threshold and picks the one with
/// the highest mean accuracy; ties go to the smaller subset, then to the
/// earlier threshold.
pub fn threshold_sweep<F>(
    ranking: &FeatureRanking,
    thresholds: &[f64],
    mut evaluator: F,
) -> Result<SweepReport>
where
    F: FnMut(&FeatureSubset) -> Result<f64>,
{
    if thresholds.is_empty() {
        return Err(Error::input("threshold sweep needs at least one threshold"));
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let subset = select_by_threshold(ranking, t);
        let acc = evaluator(&subset).map_err(|e| e.context(format!("threshold {t}")))?;
        rows.push(SweepRow {
            threshold: t,
            subset_size: subset.len(),
            mean_accuracy: acc,
        });
    }
    let best = (0..rows.len())
        .min_by(|&a, &b| {
            rows[b]
                .mean_accuracy
                .total_cmp(&rows[a].mean_accuracy)
                .then(rows[a].subset_size.cmp(&rows[b].subset_size))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    Ok(SweepReport {
        method: ranking.method,
        rows,
        best,
    })
}
