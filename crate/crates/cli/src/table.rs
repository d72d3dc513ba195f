//! Numeric CSV input and the CSV value conventions of the reports.

use std::path::Path;

use wlr_core::{DenseMatrix, Error, Result};

/// Sentinel for values that are not defined (degenerate ROC, tiny frames).
pub const UNDEFINED: &str = "undefined";

/// Shortest round-trip decimal; infinities print as `inf` / `-inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        UNDEFINED.to_string()
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), num)
}

/// Reads a header-less CSV of numbers, one matrix row per line.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let fail = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut rows = 0;
    let mut cols = None;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if *cols.get_or_insert(record.len()) != record.len() {
            return Err(fail(format!("row {} has {} fields", rows + 1, record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(format!("row {}: `{field}` is not a number", rows + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| fail("empty matrix".into()))?;
    let m = DenseMatrix::from_row_slice(rows, cols, &values)?;
    DenseMatrix::from_nalgebra(m.into_nalgebra())
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    for i in 0..a.rows() {
        let row: Vec<String> = (0..a.cols()).map(|j| num(a.get(i, j))).collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
