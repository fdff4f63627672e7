//! CSV input and JSON document output.
//!
//! Matrices arrive row-major with an optional header row; result documents
//! are JSON whose floats round-trip doubles exactly. Wall-clock timings are
//! excluded from documents so identical runs serialize byte for byte.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::Value;

use crate::config::{LoadedConfig, MatrixSource, VectorSource};
use crate::error::{CliError, CliResult};

/// Reads a CSV file into rectangular rows, skipping one header row when the
/// first row is not fully numeric.
fn read_rows(path: &Path, field: &str) -> CliResult<Vec<Vec<f64>>> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::validation(&shown, field, format!("cannot open CSV: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::validation(&shown, field, format!("CSV read error: {e}")))?;
        let cells: Vec<&str> = record.iter().filter(|c| !c.is_empty()).collect();
        if cells.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if index == 0 => continue,
            Err(e) => {
                return Err(CliError::validation(
                    &shown,
                    field,
                    format!("row {} is not numeric: {e}", index + 1),
                ))
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::validation(&shown, field, "CSV contains no numeric rows"));
    }
    let width = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(CliError::validation(
            &shown,
            field,
            format!("row {} has {} cells, expected {width}", bad + 1, rows[bad].len()),
        ));
    }
    Ok(rows)
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> DMatrix<f64> {
    let nrows = rows.len();
    let ncols = rows[0].len();
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn load_matrix(config: &LoadedConfig, source: &MatrixSource, field: &str) -> CliResult<DMatrix<f64>> {
    match source {
        MatrixSource::Inline(rows) => {
            if rows.is_empty() || rows[0].is_empty() {
                return Err(CliError::validation(&config.path, field, "inline matrix is empty"));
            }
            let width = rows[0].len();
            if rows.iter().any(|r| r.len() != width) {
                return Err(CliError::validation(
                    &config.path,
                    field,
                    "inline matrix rows have unequal lengths",
                ));
            }
            Ok(rows_to_matrix(rows.clone()))
        }
        MatrixSource::Path(rel) => Ok(rows_to_matrix(read_rows(&config.resolve(rel), field)?)),
    }
}

pub fn load_vector(config: &LoadedConfig, source: &VectorSource, field: &str) -> CliResult<DVector<f64>> {
    match source {
        VectorSource::Inline(values) => {
            if values.is_empty() {
                return Err(CliError::validation(&config.path, field, "inline vector is empty"));
            }
            Ok(DVector::from_column_slice(values))
        }
        VectorSource::Path(rel) => {
            let rows = read_rows(&config.resolve(rel), field)?;
            let shown = config.resolve(rel).display().to_string();
            if rows.len() == 1 {
                Ok(DVector::from_column_slice(&rows[0]))
            } else if rows.iter().all(|r| r.len() == 1) {
                Ok(DVector::from_iterator(rows.len(), rows.iter().map(|r| r[0])))
            } else {
                Err(CliError::validation(
                    &shown,
                    field,
                    "vector CSV must be a single row or a single column",
                ))
            }
        }
    }
}

/// The result document every successful run writes.
#[derive(Debug, Serialize)]
pub struct Document {
    pub command: &'static str,
    pub status: &'static str,
    /// Resolved configuration, embedded for the audit trail.
    pub config: Value,
    pub result: Value,
    pub warnings: Vec<String>,
}

/// The diagnostic document every failed run writes.
#[derive(Debug, Serialize)]
struct Diagnostic<'a> {
    command: &'static str,
    status: &'static str,
    error: &'a CliError,
}

fn emit(text: String, output: Option<&Path>) -> std::io::Result<()> {
    match output {
        Some(path) => fs::write(path, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn write_document(doc: &Document, output: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).expect("document serializes") + "\n";
    emit(text, output).map_err(|e| {
        CliError::validation(
            output.map(|p| p.display().to_string()).unwrap_or_default(),
            "--output",
            format!("cannot write result document: {e}"),
        )
    })
}

/// Best-effort write of the diagnostic; failures fall back to stderr.
pub fn write_diagnostic(command: &'static str, error: &CliError, output: Option<&Path>) {
    let doc = Diagnostic {
        command,
        status: "error",
        error,
    };
    let text = serde_json::to_string_pretty(&doc).expect("diagnostic serializes") + "\n";
    if emit(text, output).is_err() {
        eprintln!("{}", serde_json::to_string(&doc).expect("diagnostic serializes"));
    }
}

/// Converts a value into the JSON form embedded in documents.
pub fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("config and results serialize")
}
