use fcnet::connectome::{
    extract_features, num_pairs, pair_index, pearson, FeatureExtractor, LabeledSeries,
    TimeSeriesMatrix,
};
use fcnet::data::{
    load_feature_matrix, load_feature_matrix_csv, load_subject_manifest, load_timeseries_dir,
    read_feature_matrix, save_feature_matrix, save_feature_matrix_csv, synth_features,
    synth_timeseries, write_feature_matrix, CouplingSpec, FeatureMatrix, Label, SyntheticSpec,
};
use fcnet::feature_selection::{rank_features, SelectionMethod};
use fcnet::Error;
use ndarray::Array2;
use proptest::prelude::*;
use statrs::statistics::Statistics;

fn encode(fm: &FeatureMatrix) -> Vec<u8> {
    let mut buf = Vec::new();
    write_feature_matrix(fm, &mut buf).unwrap();
    buf
}

#[test]
fn full_atlas_width() {
    assert_eq!(num_pairs(392), 76636);
    assert_eq!(FeatureExtractor::new(392).num_features(), 76636);
    assert_eq!(pair_index(392, 390, 391), 76635);
}

#[test]
fn pearson_matches_reference_statistics() {
    let fm = synth_features(&SyntheticSpec::new(12, 0, 0.0, 15, 2)).unwrap();
    for a in 0..12 {
        for b in 0..12 {
            let (x, y) = (fm.column(a), fm.column(b));
            let reference =
                x.clone().covariance(y.clone()) / (x.clone().std_dev() * y.clone().std_dev());
            assert!((pearson(&x, &y).unwrap() - reference).abs() < 1e-12);
        }
    }
}

#[test]
fn binary_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let fm = synth_features(&SyntheticSpec::new(40, 4, 1.0, 9, 3).with_class_sizes(9, 13)).unwrap();
    let path = dir.path().join("m.fcfm");
    save_feature_matrix(&fm, &path).unwrap();
    let back = load_feature_matrix(&path).unwrap();
    assert_eq!(back.labels(), fm.labels());
    assert_eq!(back.provenance(), fm.provenance());
    for (a, b) in back.values().iter().zip(fm.values()) {
        assert_eq!(*a, f64::from(*b as f32));
    }
    // Saving the narrowed matrix again is bit-stable.
    assert_eq!(encode(&back), std::fs::read(&path).unwrap());
}

#[test]
fn csv_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let fm = synth_features(&SyntheticSpec::new(7, 2, 1.0, 5, 8)).unwrap();
    let path = dir.path().join("m.csv");
    save_feature_matrix_csv(&fm, &path).unwrap();
    let back = load_feature_matrix_csv(&path).unwrap();
    assert_eq!(back.values(), fm.values());
    assert_eq!(back.labels(), fm.labels());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_feature_matrix("/nonexistent/x.fcfm").unwrap_err();
    assert!(matches!(err.root(), Error::Io { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn corrupted_header_is_rejected(pos in 0usize..8, byte in any::<u8>()) {
        let fm = synth_features(&SyntheticSpec::new(5, 1, 1.0, 3, 1)).unwrap();
        let mut bytes = encode(&fm);
        prop_assume!(bytes[pos] != byte);
        bytes[pos] = byte;
        let err = read_feature_matrix(&bytes).unwrap_err();
        let offset_ok = matches!(err, Error::Format { offset, .. } if offset == if pos < 4 { 0 } else { 4 });
        prop_assert!(offset_ok, "{err}");
    }

    #[test]
    fn truncation_never_yields_a_matrix(cut in 0usize..300) {
        let fm = synth_features(&SyntheticSpec::new(6, 1, 1.0, 4, 1)).unwrap();
        let fm = FeatureMatrix::new(fm.values().clone(), fm.labels().to_vec()).unwrap();
        let bytes = encode(&fm);
        let cut = cut % bytes.len();
        // Without a footer every proper prefix is short of data.
        let err = read_feature_matrix(&bytes[..cut]).unwrap_err();
        let is_format = matches!(err, Error::Format { .. });
        prop_assert!(is_format);
    }

    #[test]
    fn bad_label_bytes_are_located(row in 0usize..8, byte in 2u8..) {
        let fm = synth_features(&SyntheticSpec::new(3, 1, 1.0, 4, 1)).unwrap();
        let mut bytes = encode(&fm);
        let at = 24 + 8 * 3 * 4 + row;
        bytes[at] = byte;
        let err = read_feature_matrix(&bytes).unwrap_err();
        let located = matches!(err, Error::Format { offset, .. } if offset == at as u64);
        prop_assert!(located);
    }
}

#[test]
fn synthetic_features_are_deterministic_per_seed() {
    let spec = SyntheticSpec::new(50, 5, 1.0, 10, 77);
    let a = synth_features(&spec).unwrap();
    let b = synth_features(&spec).unwrap();
    assert_eq!(encode(&a), encode(&b));
    let c = synth_features(&SyntheticSpec::new(50, 5, 1.0, 10, 78)).unwrap();
    assert_ne!(a.values(), c.values());
}

fn write_subject(dir: &std::path::Path, ts: &TimeSeriesMatrix) {
    let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", ts.subject_id()))).unwrap();
    for row in ts.series().rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn timeseries_pipeline_recovers_the_coupled_pair() {
    let coupling = CouplingSpec {
        coupled_pairs: vec![(2, 5)],
        positive_coupling: 0.8,
        negative_coupling: 0.0,
        ..CouplingSpec::default()
    };
    let subjects = synth_timeseries(24, 8, 120, &coupling, 11).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::from("subject_id,label\n");
    for s in &subjects {
        write_subject(dir.path(), &s.series);
        manifest += &format!("{},{}\n", s.series.subject_id(), s.label.as_u8());
    }
    let manifest_path = dir.path().join("labels.txt");
    std::fs::write(&manifest_path, manifest).unwrap();

    let labels = load_subject_manifest(&manifest_path).unwrap();
    let loaded: Vec<LabeledSeries> = load_timeseries_dir(dir.path())
        .unwrap()
        .into_iter()
        .map(|series| {
            let label = labels[series.subject_id()];
            LabeledSeries { series, label }
        })
        .collect();
    assert_eq!(loaded.len(), 24);

    let (fm, diag) = extract_features(&loaded).unwrap();
    assert_eq!(fm.cols(), num_pairs(8));
    assert_eq!(diag.degenerate_pairs(), 0);
    let ranking = rank_features(&fm, SelectionMethod::Dsdc).unwrap();
    assert_eq!(ranking.order[0], pair_index(8, 2, 5));

    // Loading through CSV text must reproduce the in-memory extraction.
    let mut in_memory = subjects.clone();
    in_memory.sort_by(|a, b| a.series.subject_id().cmp(b.series.subject_id()));
    let (direct, _) = extract_features(&in_memory).unwrap();
    assert_eq!(direct.values(), fm.values());
}

#[test]
fn constant_roi_is_reported_not_fatal() {
    let mut series = Array2::from_shape_fn((4, 10), |(r, t)| ((r + 1) * t) as f64 % 7.0);
    series.row_mut(3).fill(2.5);
    let ts = TimeSeriesMatrix::new("s", series).unwrap();
    let (fm, diag) = extract_features(&[LabeledSeries {
        series: ts,
        label: Label::Negative,
    }])
    .unwrap();
    assert_eq!(diag.degenerate_pairs(), 3);
    for i in 0..3 {
        assert_eq!(fm.values()[[0, pair_index(4, i, 3)]], 0.0);
    }
}
