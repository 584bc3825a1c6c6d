//! Plain CSV ingestion and emission (dense numeric tables with a header).

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::CliError;

/// Write a dense table; floats use the shortest round-trip formatting, so
/// identical inputs produce byte-identical files.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a dense numeric CSV with a header row.
pub fn read_dense_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>), CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(CliError::Config(format!(
                "{}: line {} has {} fields, header has {}",
                path.display(),
                ln + 2,
                fields.len(),
                header.len()
            )));
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "{}: line {} has a non-numeric field '{f}'",
                    path.display(),
                    ln + 2
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = header.len();
    let arr = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((header, arr))
}

/// Split a numeric table into features and an integer label column named in
/// the header.
pub fn split_labels(
    header: &[String],
    table: &Array2<f64>,
    label_column: &str,
) -> Result<(Array2<f64>, Vec<usize>), CliError> {
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| CliError::Config(format!("no column named '{label_column}'")))?;
    let (rows, cols) = table.dim();
    let mut x = Array2::zeros((rows, cols - 1));
    let mut labels = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut cj = 0;
        for c in 0..cols {
            if c == label_idx {
                let v = table[(r, c)];
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(CliError::Config(format!(
                        "row {r}: label {v} is not a nonnegative integer"
                    )));
                }
                labels.push(v as usize);
            } else {
                x[(r, cj)] = table[(r, c)];
                cj += 1;
            }
        }
    }
    Ok((x, labels))
}

/// Read a CSV as raw strings (for tables with non-numeric columns).
pub fn read_csv_strings(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows: Vec<Vec<String>> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.trim().to_string()).collect())
        .collect();
    Ok((header, rows))
}

/// Format a float for CSV/dat output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
