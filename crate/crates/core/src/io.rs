//! Sample CSV files: one point per row, comma-separated decimal columns, an
//! optional header row recognized by a non-numeric first token.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{Label, Sample};

pub fn read_sample<R: Read>(reader: R, label: Option<Label>) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows.is_empty() && line == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: line + 1,
                    msg: format!("column {}: `{f}`: {e}", col + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: line + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Sample::from_rows(&rows, label)
}

pub fn read_sample_file(path: &Path, label: Option<Label>) -> Result<Sample> {
    read_sample(std::fs::File::open(path)?, label)
}

/// Writes `x1,...,xd` header and one row per point.
pub fn write_sample<W: Write>(writer: W, sample: &Sample) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record((1..=sample.dim()).map(|j| format!("x{j}")))?;
    for i in 0..sample.len() {
        w.write_record(sample.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample_file(path: &Path, sample: &Sample) -> Result<()> {
    write_sample(std::fs::File::create(path)?, sample)
}
