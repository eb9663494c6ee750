use std::fs;

use olce::signalio::{
    compute_stratified_split, load_manifest, load_sample, normalize_channel, save_dataset, save_sample,
    zero_center_normalize, Dataset, ResponseSample, SENSOR_NAMES,
};
use olce::Error;
use proptest::prelude::*;

fn csv_with_rows(rows: usize, value: &str) -> String {
    let mut s = SENSOR_NAMES.join(",");
    s.push('\n');
    for _ in 0..rows {
        s.push_str(&vec![value; 10].join(","));
        s.push('\n');
    }
    s
}

#[test]
fn zero_csv_loads_as_zero_sample() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.csv");
    fs::write(&path, csv_with_rows(120, "0")).unwrap();
    let s = load_sample(&path, 0).unwrap();
    assert_eq!((s.channels(), s.length(), s.label), (10, 120, 0));
    assert!(s.data().iter().all(|&v| v == 0.0));
    assert_eq!(s.source_id, "zeros");
}

#[test]
fn short_csv_is_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    fs::write(&path, csv_with_rows(119, "0.5")).unwrap();
    match load_sample(&path, 0) {
        Err(Error::Dimension(msg)) => assert!(msg.contains("expected 120 rows, found 119"), "{msg}"),
        other => panic!("expected a dimension error, got {other:?}"),
    }
}

#[test]
fn unparsable_cell_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let text = csv_with_rows(120, "1.0").replacen("1.0", "abc", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_sample(&path, 0), Err(Error::Parse { .. })));
}

#[test]
fn constant_and_two_point_channels() {
    let mut out = [9.0; 5];
    normalize_channel(&[1.0; 5], &mut out);
    assert_eq!(out, [0.0; 5]);
    let mut out = [0.0; 2];
    normalize_channel(&[0.0, 2.0], &mut out);
    assert_eq!(out, [-0.5, 0.5]);
}

fn sample_strategy() -> impl Strategy<Value = ResponseSample> {
    prop::collection::vec(-1e3f64..1e3, 10 * 120)
        .prop_map(|data| ResponseSample::new(10, 120, data, 3, "p").unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn save_load_round_trip(s in sample_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_sample(&s, &path).unwrap();
        let back = load_sample(&path, 3).unwrap();
        for (a, b) in s.data().iter().zip(back.data()) {
            // nine significant digits survive the text format
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300));
        }
        // a second round trip is exact
        let again = dir.path().join("q.csv");
        save_sample(&back, &again).unwrap();
        let twice = load_sample(&again, 3).unwrap();
        prop_assert_eq!(twice.data(), back.data());
    }

    #[test]
    fn normalized_channels_are_centred_with_unit_range(s in sample_strategy()) {
        let n = zero_center_normalize(&s);
        for ch in 0..10 {
            let c = n.channel(ch);
            let sum: f64 = c.iter().sum();
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            prop_assert!(sum.abs() <= 1e-9 * 120.0);
            prop_assert!((hi - lo - 1.0).abs() <= 1e-9);
        }
    }
}

fn toy_dataset(classes: usize, per_class: usize) -> Dataset {
    let samples = (0..classes * per_class)
        .map(|i| ResponseSample::new(1, 4, vec![i as f64; 4], i / per_class, format!("s{i}")).unwrap())
        .collect();
    Dataset::new(samples, classes, vec![]).unwrap()
}

#[test]
fn split_of_700_has_25_per_class() {
    let ds = toy_dataset(7, 100);
    let split = compute_stratified_split(&ds, 0.25, 11).unwrap();
    assert_eq!(split.test.len(), 175);
    for c in 0..7 {
        assert_eq!(split.test.iter().filter(|&&i| ds.samples[i].label == c).count(), 25);
    }
    assert_eq!(split, compute_stratified_split(&ds, 0.25, 11).unwrap());
    assert_ne!(split, compute_stratified_split(&ds, 0.25, 12).unwrap());
}

#[test]
fn four_per_class_gives_one_test_sample_each() {
    let ds = toy_dataset(7, 4);
    let split = compute_stratified_split(&ds, 0.25, 0).unwrap();
    assert_eq!(split.test.len(), 7);
    assert_eq!(split.train.len(), 21);
}

#[test]
fn dataset_round_trips_through_manifest() {
    let ds = toy_dataset(3, 4);
    let dir = tempfile::tempdir().unwrap();
    // non-default geometry is recorded in the manifest
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let back = load_manifest(&manifest).unwrap();
    assert_eq!(back.samples, ds.samples);
    assert_eq!(back.class_names, ds.class_names);
}
