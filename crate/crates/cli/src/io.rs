use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Plain comma-separated doubles, no header.
pub fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("reading {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Validation(format!(
                        "{}: cell ({r}, {c}) is not a number: `{field}`",
                        path.display()
                    ))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: empty matrix", path.display())));
    }
    Ok(rows)
}

pub fn write_rows<S: AsRef<str>>(path: &Path, header: Option<&[S]>, rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::write(path, e))?;
    if let Some(h) = header {
        w.write_record(h.iter().map(|s| s.as_ref())).map_err(|e| CliError::write(path, e))?;
    }
    for row in rows {
        w.write_record(row).map_err(|e| CliError::write(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> CliResult<()> {
    let text: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(f64::to_string).collect()).collect();
    write_rows::<&str>(path, None, &text)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::write(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::write(path, e))
}

/// Print a JSON value on stdout. A closed pipe is not an error.
pub fn emit(value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Internal(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}
