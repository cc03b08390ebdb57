//! Filesystem helpers: atomic writes and time-series / manifest CSV ingestion.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::Label;
use crate::connectome::TimeSeriesMatrix;
use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// One subject's series: rows are ROIs, columns are timepoints, no header.
/// The subject id is the file stem.
pub fn load_timeseries_csv(path: impl AsRef<Path>) -> Result<TimeSeriesMatrix> {
    let path = path.as_ref();
    let subject_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::input(format!("bad file name {}", path.display())))?
        .to_string();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::format(offset, "ragged time-series rows")
                .context(path.display().to_string()));
        }
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(offset, format!("not a number: {field:?}"))
                    .context(path.display().to_string())
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let series = Array2::from_shape_vec((rows, width.unwrap_or(0)), values)
        .map_err(|e| Error::input(e.to_string()))?;
    TimeSeriesMatrix::new(subject_id, series).map_err(|e| e.context(path.display().to_string()))
}

/// Every `*.csv` in `dir`, sorted by subject id.
pub fn load_timeseries_dir(dir: impl AsRef<Path>) -> Result<Vec<TimeSeriesMatrix>> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::input(format!(
            "no time-series CSV files in {}",
            dir.display()
        )));
    }
    paths.iter().map(load_timeseries_csv).collect()
}

/// `subject_id,label` rows with label ∈ {0,1}; an optional header row is skipped.
pub fn load_subject_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, Label>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.len() != 2 {
            return Err(Error::format(
                offset,
                "manifest rows must be subject_id,label",
            ));
        }
        let (id, label) = (rec[0].trim(), rec[1].trim());
        if i == 0 && label == "label" {
            continue;
        }
        let label = match label {
            "0" => Label::Negative,
            "1" => Label::Positive,
            other => {
                return Err(Error::format(
                    offset,
                    format!("label for {id} must be 0 or 1, got {other:?}"),
                ))
            }
        };
        if out.insert(id.to_string(), label).is_some() {
            return Err(Error::format(offset, format!("duplicate subject {id}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "subject_id,label\nsub01,1\nsub02,0\n").unwrap();
        let m = load_subject_manifest(&p).unwrap();
        assert_eq!(m["sub01"], Label::Positive);
        assert_eq!(m["sub02"], Label::Negative);
        std::fs::write(&p, "sub01,2\n").unwrap();
        assert!(load_subject_manifest(&p).is_err());
    }

    #[test]
    fn timeseries_csv_uses_stem_as_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub07.csv");
        std::fs::write(&p, "1,2,3\n3,2,1\n").unwrap();
        let ts = load_timeseries_csv(&p).unwrap();
        assert_eq!(ts.subject_id(), "sub07");
        assert_eq!(ts.num_rois(), 2);
        assert_eq!(ts.num_timepoints(), 3);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
