use garch_ksample_experiments::data::{write_columns_csv, DataError};
use garch_ksample_experiments::{ingest_csv, write_series_csv, Column, IngestOptions, SeriesKind};
use std::io::Write;

fn file_with(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn three_prices_give_two_log_returns() {
    let f = file_with("date,close\n2024-01-02,100\n2024-01-03,110\n2024-01-04,99\n");
    let opts = IngestOptions { column: Column::Name("close".into()), kind: SeriesKind::Prices, ..Default::default() };
    let s = ingest_csv(f.path(), &opts).unwrap();
    assert_eq!(s.values.len(), 2);
    assert_eq!(s.values[0], (110.0f64 / 100.0).ln());
    assert_eq!(s.values[1], (99.0f64 / 110.0).ln());
    let simple = IngestOptions { log_returns: false, ..opts };
    let s = ingest_csv(f.path(), &simple).unwrap();
    assert!((s.values[0] - 0.1).abs() < 1e-15);
}

#[test]
fn constant_growth_prices() {
    let f = file_with("p\n100\n110\n121\n");
    let opts = IngestOptions { kind: SeriesKind::Prices, ..Default::default() };
    let s = ingest_csv(f.path(), &opts).unwrap();
    assert_eq!(s.values.len(), 2);
    for r in s.values {
        assert!((r - 1.1f64.ln()).abs() < 1e-15);
    }
}

#[test]
fn synthetic_fixtures_load_as_prices() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for name in ["synthetic_alpha.csv", "synthetic_beta.csv", "synthetic_gamma.csv"] {
        let opts = IngestOptions {
            column: Column::Name("close".into()),
            kind: SeriesKind::Prices,
            tail: Some(2000),
            ..Default::default()
        };
        let s = ingest_csv(&dir.join(name), &opts).unwrap();
        assert_eq!((s.values.len(), s.dropped), (2000, 0));
        let n = s.values.len() as f64;
        let m2 = s.values.iter().map(|r| r * r).sum::<f64>() / n;
        let m4 = s.values.iter().map(|r| r.powi(4)).sum::<f64>() / n;
        // heavy tails: kurtosis well above the Gaussian 3
        assert!(m4 / (m2 * m2) > 4.0, "{name}");
    }
}

#[test]
fn header_only_file_is_an_error() {
    let f = file_with("x\n");
    assert!(matches!(ingest_csv(f.path(), &IngestOptions::default()), Err(DataError::Empty { .. })));
}

#[test]
fn missing_column_and_bad_index() {
    let f = file_with("a,b\n1,2\n");
    let by_name = IngestOptions { column: Column::Name("c".into()), ..Default::default() };
    assert!(matches!(ingest_csv(f.path(), &by_name), Err(DataError::MissingColumn { .. })));
    let by_index = IngestOptions { column: Column::Index(2), ..Default::default() };
    assert!(matches!(ingest_csv(f.path(), &by_index), Err(DataError::ColumnIndex { .. })));
    let second = IngestOptions { column: Column::Index(1), ..Default::default() };
    assert_eq!(ingest_csv(f.path(), &second).unwrap().values, vec![2.0]);
}

#[test]
fn bad_rows_tolerated_up_to_the_limit() {
    let mut text = String::from("x\n");
    for i in 0..99 {
        text.push_str(&format!("{}\n", i as f64 * 0.01));
    }
    text.push_str("NaN\n");
    let f = file_with(&text);
    let s = ingest_csv(f.path(), &IngestOptions::default()).unwrap();
    assert_eq!((s.values.len(), s.dropped), (99, 1));
    let strict = IngestOptions { max_bad_fraction: 0.0, ..Default::default() };
    assert!(matches!(ingest_csv(f.path(), &strict), Err(DataError::TooManyBadRows { .. })));
}

#[test]
fn non_positive_prices_rejected() {
    let f = file_with("p\n10\n0\n12\n");
    let opts = IngestOptions { kind: SeriesKind::Prices, ..Default::default() };
    assert!(matches!(ingest_csv(f.path(), &opts), Err(DataError::NonPositivePrice { .. })));
}

#[test]
fn tail_keeps_the_most_recent_values() {
    let f = file_with("x\n1\n2\n3\n4\n5\n");
    let opts = IngestOptions { tail: Some(2), ..Default::default() };
    assert_eq!(ingest_csv(f.path(), &opts).unwrap().values, vec![4.0, 5.0]);
}

#[test]
fn written_series_round_trip_bit_exactly() {
    let mut s = 0x9e37_79b9_7f4a_7c15u64;
    let values: Vec<f64> = (0..2000)
        .map(|i| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let u = (s >> 11) as f64 / (1u64 << 53) as f64;
            (u - 0.5) * 10f64.powi(i % 9 - 4)
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    write_series_csv(&path, "x", &values).unwrap();
    let back = ingest_csv(&path, &IngestOptions::default()).unwrap();
    assert_eq!(back.values.len(), values.len());
    for (a, b) in values.iter().zip(&back.values) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let multi = dir.path().join("multi.csv");
    write_columns_csv(&multi, &[("a", &values[..10]), ("b", &values[10..20])]).unwrap();
    let b = ingest_csv(&multi, &IngestOptions { column: Column::Name("b".into()), ..Default::default() }).unwrap();
    assert_eq!(b.values, values[10..20].to_vec());
}
