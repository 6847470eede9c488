//! Plain-text matrix exchange: one row per line, comma separated, no header,
//! 17 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{MmvError, Result};

/// Formats a value with 17 significant digits (round-trips every `f64`).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&v| format_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in r.records() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(MmvError::Parse(format!(
                    "row {} has {} columns, expected {c}",
                    rows + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| MmvError::Parse(format!("not a number: '{field}'")))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| MmvError::Parse("empty matrix file".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    write_matrix(File::create(path)?, m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_matrix(File::open(path)?)
}
