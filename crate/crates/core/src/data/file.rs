//! `FCFM` binary feature-matrix files and the CSV variant.
//!
//! Binary layout, all integers little-endian:
//!
//! | offset | size            | content                         |
//! |--------|-----------------|---------------------------------|
//! | 0      | 4               | magic `b"FCFM"`                 |
//! | 4      | 4               | format version, `u32` = 1       |
//! | 8      | 8               | rows, `u64`                     |
//! | 16     | 8               | cols, `u64`                     |
//! | 24     | rows·cols·4     | values, row-major `f32`         |
//! | …      | rows            | labels, one byte each, 0 or 1   |
//! | …      | remainder       | optional UTF-8 JSON provenance  |
//!
//! Values are narrowed to `f32` on write; everything else round-trips exactly.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::io::write_atomic;
use super::{FeatureMatrix, Label};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FCFM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;

/// Byte length of a file with the given shape and footer.
pub fn feature_matrix_file_len(rows: u64, cols: u64, footer_len: u64) -> u64 {
    HEADER_LEN + rows * cols * 4 + rows + footer_len
}

pub fn write_feature_matrix(fm: &FeatureMatrix, out: &mut impl Write) -> Result<()> {
    let mut buf =
        Vec::with_capacity(feature_matrix_file_len(fm.rows() as u64, fm.cols() as u64, 0) as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(fm.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(fm.cols() as u64).to_le_bytes());
    for v in fm.values().iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    buf.extend(fm.labels().iter().map(|l| l.as_u8()));
    if let Some(p) = fm.provenance() {
        serde_json::to_writer(&mut buf, p)?;
    }
    out.write_all(&buf).map_err(|e| Error::io("<writer>", e))
}

pub fn save_feature_matrix(fm: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_feature_matrix(fm, &mut buf)?;
    write_atomic(path, &buf)
}

fn take<'a>(bytes: &'a [u8], offset: u64, len: u64, what: &str) -> Result<&'a [u8]> {
    let end = offset.checked_add(len).filter(|&e| e <= bytes.len() as u64);
    match end {
        Some(end) => Ok(&bytes[offset as usize..end as usize]),
        None => Err(Error::format(
            bytes.len() as u64,
            format!("truncated file: {what} needs {len} bytes at offset {offset}"),
        )),
    }
}

/// Decodes a complete file image. Never returns a partial matrix.
pub fn read_feature_matrix(bytes: &[u8]) -> Result<FeatureMatrix> {
    let magic = take(bytes, 0, 4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:02x?}")));
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(take(bytes, 8, 8, "row count")?.try_into().unwrap());
    let cols = u64::from_le_bytes(take(bytes, 16, 8, "column count")?.try_into().unwrap());
    let value_bytes = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(8, "matrix shape overflows"))?;
    let body = take(bytes, HEADER_LEN, value_bytes, "values")?;
    let label_offset = HEADER_LEN + value_bytes;
    let label_bytes = take(bytes, label_offset, rows, "labels")?;

    let mut labels = Vec::with_capacity(rows as usize);
    for (i, &b) in label_bytes.iter().enumerate() {
        let label =
            Label::try_from(b).map_err(|msg| Error::format(label_offset + i as u64, msg))?;
        labels.push(label);
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let values = Array2::from_shape_vec((rows as usize, cols as usize), values)
        .map_err(|e| Error::format(8, e.to_string()))?;

    let footer_offset = label_offset + rows;
    let footer = &bytes[footer_offset as usize..];
    let mut fm = FeatureMatrix::new(values, labels)?;
    if !footer.is_empty() {
        let text = std::str::from_utf8(footer).map_err(|e| {
            Error::format(
                footer_offset + e.valid_up_to() as u64,
                "footer is not UTF-8",
            )
        })?;
        let json = serde_json::from_str(text)
            .map_err(|e| Error::format(footer_offset, format!("footer is not JSON: {e}")))?;
        fm = fm.with_provenance(json);
    }
    Ok(fm)
}

pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_feature_matrix(&bytes).map_err(|e| e.context(format!("reading {}", path.display())))
}

/// CSV variant: header `feature_0,…,feature_{n-1},label`, one subject per
/// row. Values are written in shortest round-trip form.
pub fn feature_matrix_csv_bytes(fm: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..fm.cols()).map(|j| format!("feature_{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (i, label) in fm.labels().iter().enumerate() {
        let mut rec: Vec<String> = fm.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(label.as_u8().to_string());
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::input(format!("csv buffer: {e}")))
}

pub fn save_feature_matrix_csv(fm: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &feature_matrix_csv_bytes(fm)?)
}

pub fn load_feature_matrix_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let cols = header.len().saturating_sub(1);
    if header.get(cols) != Some("label") {
        return Err(Error::format(0, "last CSV column must be `label`"));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte());
        if rec.len() != cols + 1 {
            return Err(Error::format(
                offset,
                format!("expected {} fields", cols + 1),
            ));
        }
        for field in rec.iter().take(cols) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(offset, format!("not a number: {field:?}")))?;
            values.push(v);
        }
        let label = match rec[cols].trim() {
            "0" => Label::Negative,
            "1" => Label::Positive,
            other => {
                return Err(Error::format(
                    offset,
                    format!("label must be 0 or 1, got {other:?}"),
                ))
            }
        };
        labels.push(label);
    }
    let values = Array2::from_shape_vec((labels.len(), cols), values)
        .map_err(|e| Error::format(0, e.to_string()))?;
    FeatureMatrix::new(values, labels)
}
