//! Numeric CSV input for the fit commands. All accepted files carry a
//! header row followed by purely numeric records, matching what the other
//! subcommands write.

use std::path::Path;

use crate::error::{Failure, Result};

/// Read a CSV file into rows of floats. Every record must have between
/// `min_columns` and `max_columns` fields, and all records the same count.
pub fn read_rows(path: &Path, min_columns: usize, max_columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|err| Failure::usage(format!("cannot read {}: {err}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record
            .map_err(|err| Failure::domain(format!("{}: {err}", path.display())))?;
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| {
                Failure::domain(format!(
                    "{}: record {}: `{field}` is not a number",
                    path.display(),
                    index + 1
                ))
            })?;
            row.push(value);
        }
        if row.len() < min_columns || row.len() > max_columns {
            return Err(Failure::domain(format!(
                "{}: record {}: expected {min_columns}..={max_columns} columns, got {}",
                path.display(),
                index + 1,
                row.len()
            )));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Failure::domain(format!(
                    "{}: record {}: column count changes mid-file",
                    path.display(),
                    index + 1
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::domain(format!("{}: no data records", path.display())));
    }
    Ok(rows)
}

/// Two-column convenience wrapper returning (x, y) pairs.
pub fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    Ok(read_rows(path, 2, 2)?.into_iter().map(|row| (row[0], row[1])).collect())
}
