//! Generic CSV ingestion for pre-featurized data.
//!
//! Layout: one sample per row, M comma-separated floats in `[0,1]` with
//! `.` as the decimal separator, optionally followed by an integer label
//! column. An optional header row is auto-detected (a first row whose
//! fields do not all parse as numbers is skipped). Row/column positions in
//! errors are 1-based and count the header row.

use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::qkernel::{Sample, SampleId};

fn csv_err(path: &Path, row: usize, col: usize, detail: impl Into<String>) -> Error {
    Error::CsvFormat {
        path: path.to_path_buf(),
        row,
        col,
        detail: detail.into(),
    }
}

/// Loads a CSV file; `has_labels` declares whether the final column is an
/// integer class label.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let mut samples = Vec::new();
    let mut expected_fields: Option<usize> = None;
    let mut next_id = 0u64;

    for (line_index, line) in text.lines().enumerate() {
        let row = line_index + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();

        // Header auto-detection: a first row with any non-numeric field.
        if next_id == 0
            && expected_fields.is_none()
            && fields.iter().any(|f| f.parse::<f64>().is_err())
        {
            continue;
        }

        match expected_fields {
            None => {
                let min = if has_labels { 2 } else { 1 };
                if fields.len() < min {
                    return Err(csv_err(
                        path,
                        row,
                        fields.len(),
                        format!("need at least {min} columns, found {}", fields.len()),
                    ));
                }
                expected_fields = Some(fields.len());
            }
            Some(n) if fields.len() != n => {
                return Err(csv_err(
                    path,
                    row,
                    fields.len(),
                    format!("ragged row: expected {n} columns, found {}", fields.len()),
                ));
            }
            Some(_) => {}
        }

        let feature_count = fields.len() - usize::from(has_labels);
        let mut features = Vec::with_capacity(feature_count);
        for (i, field) in fields[..feature_count].iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                csv_err(path, row, i + 1, format!("cannot parse \"{field}\" as a number"))
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(csv_err(
                    path,
                    row,
                    i + 1,
                    format!("feature value {value} outside the domain [0, 1]"),
                ));
            }
            features.push(value);
        }

        let label = if has_labels {
            let field = fields[feature_count];
            let label: usize = field.parse().map_err(|_| {
                csv_err(
                    path,
                    row,
                    fields.len(),
                    format!("cannot parse \"{field}\" as an integer class label"),
                )
            })?;
            Some(label)
        } else {
            None
        };

        let sample = Sample::new(SampleId(next_id), features, label)
            .map_err(|e| csv_err(path, row, 0, e.to_string()))?;
        samples.push(sample);
        next_id += 1;
    }

    if samples.is_empty() {
        return Err(csv_err(path, 1, 1, "no data rows found"));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Dataset::new(name, samples)
}

/// Writes a dataset as CSV (features, then the label column if any sample
/// is labeled). Floats use the shortest representation that round-trips
/// exactly, so `load_csv(write_csv(ds))` reproduces features bit-for-bit.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write as _;

    let path = path.as_ref();
    let labeled = ds.samples().iter().any(|s| s.label().is_some());
    let mut out = String::new();
    for sample in ds.samples() {
        for (i, v) in sample.features().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("string write");
        }
        if labeled {
            match sample.label() {
                Some(l) => write!(out, ",{l}").expect("string write"),
                None => {
                    return Err(Error::Config(format!(
                        "sample {} has no label but the dataset is labeled",
                        sample.id()
                    )))
                }
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn loads_basic_unlabeled_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "0,0,0\n1,1,1\n");
        let ds = load_csv(&path, false).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.m(), 3);
        assert_eq!(ds.p(), 0);
        assert_eq!(ds.samples()[1].features(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn detects_header_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "f1,f2,label\n0.25,0.5,1\n0.75,0.125,0\n");
        let ds = load_csv(&path, true).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.m(), 2);
        assert_eq!(ds.p(), 2);
        assert_eq!(ds.samples()[0].label(), Some(1));
        assert_eq!(ds.samples()[0].features(), &[0.25, 0.5]);
    }

    #[test]
    fn out_of_range_feature_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "0.2,0.3\n0.1,1.5\n");
        match load_csv(&path, false).unwrap_err() {
            Error::CsvFormat { row, col, detail, .. } => {
                assert_eq!((row, col), (2, 2));
                assert!(detail.contains("1.5"), "detail: {detail}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "0.2,0.3\n0.1\n");
        match load_csv(&path, false).unwrap_err() {
            Error::CsvFormat { row, detail, .. } => {
                assert_eq!(row, 2);
                assert!(detail.contains("ragged"), "detail: {detail}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn bad_number_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "0.2,0.3\n0.1,oops\n");
        match load_csv(&path, false).unwrap_err() {
            Error::CsvFormat { row, col, .. } => assert_eq!((row, col), (2, 2)),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        // Values with no short decimal representation.
        let f = [
            1.0 / 3.0,
            std::f64::consts::FRAC_1_PI,
            0.1 + 0.2,
            5.0 / 255.0,
            f64::MIN_POSITIVE.sqrt().min(1.0),
        ];
        let samples = vec![
            Sample::new(SampleId(0), vec![f[0], f[1], f[2]], Some(0)).unwrap(),
            Sample::new(SampleId(1), vec![f[3], f[4], 0.0], Some(1)).unwrap(),
        ];
        let ds = Dataset::new("t", samples).unwrap();
        let path = dir.path().join("out.csv");
        write_csv(&ds, &path).unwrap();

        let back = load_csv(&path, true).unwrap();
        for (a, b) in ds.samples().iter().zip(back.samples()) {
            for (x, y) in a.features().iter().zip(b.features()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.label(), b.label());
        }
    }

    #[test]
    fn crlf_and_blank_lines_are_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "d.csv", "0.5,0.5\r\n\r\n0.25,0.75\r\n");
        let ds = load_csv(&path, false).unwrap();
        assert_eq!(ds.len(), 2);
    }
}
