//! ROI time series → Pearson connectivity → flattened feature vectors.
//!
//! Feature `k` of a flattened vector corresponds to the ROI pair `(i, j)`,
//! `i < j`, in row-major order of the strict upper triangle:
//! `k = i·n − i·(i+1)/2 + (j − i − 1)`. [`pair_index`] and [`index_pair`]
//! convert between the two.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{FeatureMatrix, Label};
use crate::error::{Error, Result};

/// One subject's ROI signals, shape `(num_rois, num_timepoints)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    subject_id: String,
    series: Array2<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(subject_id: impl Into<String>, series: Array2<f64>) -> Result<Self> {
        let subject_id = subject_id.into();
        let (rois, t) = series.dim();
        if rois < 2 || t < 3 {
            return Err(Error::input(format!(
                "subject {subject_id}: need >= 2 ROIs and >= 3 timepoints, got {rois}x{t}"
            )));
        }
        if let Some(pos) = series.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "subject {subject_id}: non-finite sample in ROI {}",
                pos / t
            )));
        }
        Ok(TimeSeriesMatrix {
            subject_id,
            series: series.as_standard_layout().into_owned(),
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn series(&self) -> &Array2<f64> {
        &self.series
    }

    pub fn num_rois(&self) -> usize {
        self.series.nrows()
    }

    pub fn num_timepoints(&self) -> usize {
        self.series.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    pub series: TimeSeriesMatrix,
    pub label: Label,
}

/// Symmetric PCC matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    values: Array2<f64>,
}

impl ConnectivityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::input(format!(
                "connectivity matrix must be square, got {:?}",
                values.dim()
            )));
        }
        Ok(ConnectivityMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConnectivityDiagnostics {
    /// Off-diagonal pairs whose PCC was undefined and set to 0.
    pub degenerate_pairs: usize,
    /// ROIs with zero variance.
    pub degenerate_rois: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub features: Vec<f64>,
    pub label: Option<Label>,
}

/// Centered copy and sum of squares. Constant input reports exactly zero
/// variance even when the computed mean is off by an ulp.
fn centered(x: ArrayView1<'_, f64>) -> (Vec<f64>, f64) {
    let mean = x.sum() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let constant = x.iter().all(|v| *v == x[0]);
    let ss = if constant {
        0.0
    } else {
        c.iter().map(|v| v * v).sum()
    };
    (c, ss)
}

fn correlate(cx: &[f64], ssx: f64, cy: &[f64], ssy: f64) -> Option<f64> {
    if ssx == 0.0 || ssy == 0.0 {
        return None;
    }
    let sxy: f64 = cx.iter().zip(cy).map(|(a, b)| a * b).sum();
    Some((sxy / (ssx * ssy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation coefficient of two equal-length series.
///
/// Returns [`Error::Degenerate`] when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::input("pearson needs at least 2 samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("pearson inputs must be finite"));
    }
    let (cx, ssx) = centered(ArrayView1::from(x));
    let (cy, ssy) = centered(ArrayView1::from(y));
    correlate(&cx, ssx, &cy, ssy).ok_or_else(|| Error::Degenerate("zero-variance series".into()))
}

/// All pairwise PCCs of a subject's ROIs. Undefined pairs are set to 0 and
/// counted in the diagnostics.
pub fn connectivity_matrix(ts: &TimeSeriesMatrix) -> (ConnectivityMatrix, ConnectivityDiagnostics) {
    let n = ts.num_rois();
    let rows: Vec<(Vec<f64>, f64)> = ts.series.rows().into_iter().map(centered).collect();
    let mut values = Array2::zeros((n, n));
    let mut diag = ConnectivityDiagnostics::default();
    for i in 0..n {
        if rows[i].1 == 0.0 {
            diag.degenerate_rois.push(i);
        } else {
            values[[i, i]] = 1.0;
        }
        for j in (i + 1)..n {
            let r = match correlate(&rows[i].0, rows[i].1, &rows[j].0, rows[j].1) {
                Some(r) => r,
                None => {
                    diag.degenerate_pairs += 1;
                    0.0
                }
            };
            values[[i, j]] = r;
            values[[j, i]] = r;
        }
    }
    (ConnectivityMatrix { values }, diag)
}

/// Number of strict-upper-triangle entries of an `n × n` matrix.
pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Flattened index of ROI pair `(i, j)` with `i < j < n`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn index_pair(n: usize, k: usize) -> (usize, usize) {
    debug_assert!(k < num_pairs(n));
    // Row i starts at pair_index(n, i, i+1); estimate i, then correct.
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * k as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize;
    i = i.min(n - 2);
    while i > 0 && pair_index(n, i, i + 1) > k {
        i -= 1;
    }
    while i + 2 < n && pair_index(n, i + 1, i + 2) <= k {
        i += 1;
    }
    let j = k - pair_index(n, i, i + 1) + i + 1;
    (i, j)
}

/// Row-major strict upper triangle.
pub fn flatten_upper_triangle(m: &ConnectivityMatrix) -> FeatureVector {
    let n = m.n();
    let mut features = Vec::with_capacity(num_pairs(n));
    for i in 0..n {
        for j in (i + 1)..n {
            features.push(m.values[[i, j]]);
        }
    }
    FeatureVector {
        features,
        label: None,
    }
}

/// Per-subject extraction diagnostics, in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionDiagnostics {
    pub subjects: Vec<(String, ConnectivityDiagnostics)>,
}

impl ExtractionDiagnostics {
    pub fn degenerate_pairs(&self) -> usize {
        self.subjects.iter().map(|(_, d)| d.degenerate_pairs).sum()
    }
}

/// Extracts features for subjects sharing a fixed ROI count.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor {
    pub num_rois: usize,
}

impl FeatureExtractor {
    pub fn new(num_rois: usize) -> Self {
        FeatureExtractor { num_rois }
    }

    pub fn num_features(&self) -> usize {
        num_pairs(self.num_rois)
    }

    /// One row per subject, input order preserved. Subjects are processed in
    /// parallel; the result does not depend on the thread count.
    pub fn extract(
        &self,
        dataset: &[LabeledSeries],
    ) -> Result<(FeatureMatrix, ExtractionDiagnostics)> {
        if let Some(bad) = dataset
            .iter()
            .find(|s| s.series.num_rois() != self.num_rois)
        {
            return Err(Error::input(format!(
                "subject {} has {} ROIs, expected {}",
                bad.series.subject_id(),
                bad.series.num_rois(),
                self.num_rois
            )));
        }
        let cols = self.num_features();
        let per_subject: Vec<(Vec<f64>, ConnectivityDiagnostics)> = dataset
            .par_iter()
            .map(|s| {
                let (m, d) = connectivity_matrix(&s.series);
                (flatten_upper_triangle(&m).features, d)
            })
            .collect();
        let mut values = Array2::zeros((dataset.len(), cols));
        let mut subjects = Vec::with_capacity(dataset.len());
        for (r, ((features, diag), s)) in per_subject.into_iter().zip(dataset).enumerate() {
            values
                .row_mut(r)
                .assign(&ArrayView1::from(features.as_slice()));
            subjects.push((s.series.subject_id().to_string(), diag));
        }
        let labels = dataset.iter().map(|s| s.label).collect();
        let ids: Vec<&str> = dataset.iter().map(|s| s.series.subject_id()).collect();
        let fm = FeatureMatrix::new(values, labels)?.with_provenance(serde_json::json!({
            "generator": "extract_features",
            "num_rois": self.num_rois,
            "subjects": ids,
        }));
        Ok((fm, ExtractionDiagnostics { subjects }))
    }
}

/// Infers the ROI count from the first subject. An empty dataset yields a
/// 0 × 0 matrix; use [`FeatureExtractor`] to record a width for empty input.
pub fn extract_features(
    dataset: &[LabeledSeries],
) -> Result<(FeatureMatrix, ExtractionDiagnostics)> {
    match dataset.first() {
        Some(first) => FeatureExtractor::new(first.series.num_rois()).extract(dataset),
        None => Ok((
            FeatureMatrix::empty(0),
            ExtractionDiagnostics { subjects: vec![] },
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap(), 1.0);
        assert_eq!(pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        // Σdxdy = 4, Σdx² = Σdy² = 5.
        let r = pearson(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1., 2.], &[1., 2., 3.]),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            pearson(&[1., 1., 1.], &[1., 2., 3.]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(pearson(&[1.], &[1.]), Err(Error::Input(_))));
    }

    #[test]
    fn two_identical_rows() {
        let ts = TimeSeriesMatrix::new("s", array![[1., 5., 2.], [1., 5., 2.]]).unwrap();
        let (m, d) = connectivity_matrix(&ts);
        assert_eq!(m.values(), &array![[1., 1.], [1., 1.]]);
        assert_eq!(d.degenerate_pairs, 0);
    }

    #[test]
    fn degenerate_rows_are_zeroed_and_counted() {
        let ts =
            TimeSeriesMatrix::new("s", array![[1., 2., 3.], [4., 4., 4.], [3., 2., 1.]]).unwrap();
        let (m, d) = connectivity_matrix(&ts);
        assert_eq!(m.get(0, 2), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(d.degenerate_pairs, 2);
        assert_eq!(d.degenerate_rois, vec![1]);
    }

    #[test]
    fn matrix_entries_match_pairwise_oracle() {
        let ts = TimeSeriesMatrix::new(
            "s",
            array![
                [0.3, -1.2, 2.2, 0.7, -0.4],
                [1.1, 0.5, -0.3, 0.9, 2.0],
                [-2.0, 0.1, 0.4, -0.6, 1.3]
            ],
        )
        .unwrap();
        let (m, _) = connectivity_matrix(&ts);
        for i in 0..3 {
            for j in 0..3 {
                let oracle =
                    pearson(&ts.series.row(i).to_vec(), &ts.series.row(j).to_vec()).unwrap();
                assert!((m.get(i, j) - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_timeseries() {
        assert!(TimeSeriesMatrix::new("s", array![[1., 2., 3.]]).is_err());
        assert!(TimeSeriesMatrix::new("s", array![[1., 2.], [1., 2.]]).is_err());
        assert!(TimeSeriesMatrix::new("s", array![[1., f64::NAN, 3.], [1., 2., 3.]]).is_err());
        assert!(ConnectivityMatrix::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn flatten_order_and_lengths() {
        assert_eq!(num_pairs(392), 76636);
        assert_eq!(num_pairs(3), 3);
        let mut v = Array2::<f64>::eye(4);
        v[[0, 1]] = 0.25;
        v[[0, 2]] = -0.5;
        v[[1, 2]] = 0.75;
        let fv = flatten_upper_triangle(&ConnectivityMatrix::new(v).unwrap());
        assert_eq!(fv.features.len(), 6);
        assert_eq!(&fv.features[..3], &[0.25, -0.5, 0.0]);
        assert_eq!(fv.features[3], 0.75);
    }

    #[test]
    fn extraction_shapes_and_errors() {
        let s = |id: &str, rois: usize| LabeledSeries {
            series: TimeSeriesMatrix::new(
                id,
                Array2::from_shape_fn((rois, 6), |(r, t)| {
                    ((r + 1) * t * t) as f64 + (r * 7 % 3) as f64 * t as f64
                }),
            )
            .unwrap(),
            label: Label::Positive,
        };
        let (fm, _) = extract_features(&[s("a", 3)]).unwrap();
        assert_eq!((fm.rows(), fm.cols()), (1, 3));
        let err = extract_features(&[s("a", 3), s("b", 4)]).unwrap_err();
        assert!(err.to_string().contains("subject b"));
        let (empty, _) = FeatureExtractor::new(392).extract(&[]).unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 76636));
        let (none, _) = extract_features(&[]).unwrap();
        assert_eq!(none.rows(), 0);
    }

    #[test]
    fn full_atlas_width() {
        let subjects: Vec<LabeledSeries> = (0..10)
            .map(|s| LabeledSeries {
                series: TimeSeriesMatrix::new(
                    format!("s{s}"),
                    Array2::from_shape_fn((392, 8), |(r, t)| ((r * 31 + t * 17 + s) % 13) as f64),
                )
                .unwrap(),
                label: if s % 2 == 0 {
                    Label::Positive
                } else {
                    Label::Negative
                },
            })
            .collect();
        let (fm, _) = extract_features(&subjects).unwrap();
        assert_eq!((fm.rows(), fm.cols()), (10, 76636));
        assert_eq!(fm.labels()[1], Label::Negative);
    }

    proptest! {
        #[test]
        fn index_map_round_trips(n in 2usize..120) {
            for k in 0..num_pairs(n) {
                let (i, j) = index_pair(n, k);
                prop_assert!(i < j && j < n);
                prop_assert_eq!(pair_index(n, i, j), k);
            }
        }

        #[test]
        fn pearson_bounded_symmetric_affine_invariant(
            xs in prop::collection::vec(-100.0f64..100.0, 3..40),
            seed in any::<u64>(),
            a in 0.01f64..50.0,
            b in -50.0f64..50.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate()
                .map(|(i, x)| x * 0.3 + ((seed.wrapping_mul(i as u64 + 1) >> 40) as f64 / 1e5).sin() * 10.0)
                .collect();
            if let (Ok(r), Ok(r2)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
                prop_assert!(r.abs() <= 1.0 + 1e-12);
                prop_assert_eq!(r, r2);
                let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                if let Ok(r3) = pearson(&scaled, &ys) {
                    prop_assert!((r3 - r).abs() < 1e-10);
                }
            }
        }
    }
}
