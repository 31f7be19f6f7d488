//! Result files: metric tables as CSV or JSON plus a summary sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentResult, MetricRow, Summary};
use super::spec::OutputFormat;
use crate::error::{Error, Result};

fn output_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// CSV with a header row, also when `rows` is empty.
pub fn write_csv<W: Write>(rows: &[MetricRow], writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(MetricRow::HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// JSON array of row objects.
pub fn write_json<W: Write>(rows: &[MetricRow], writer: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(writer, rows)
}

/// `out.csv` -> `out.summary.json`.
pub fn summary_path(path: &Path) -> PathBuf {
    path.with_extension("summary.json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn emit_rows(rows: &[MetricRow], path: &Path, format: OutputFormat) -> Result<()> {
    let mut file = create(path)?;
    match format {
        OutputFormat::Csv => write_csv(rows, &mut file).map_err(|e| output_error(path, e))?,
        OutputFormat::Json => write_json(rows, &mut file).map_err(|e| output_error(path, e))?,
    }
    file.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, summary).map_err(|e| output_error(path, e))?;
    file.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the metric table to `path` and the summary next to it.
pub fn emit(result: &ExperimentResult, path: &Path, format: OutputFormat) -> Result<PathBuf> {
    emit_rows(&result.rows, path, format)?;
    let sidecar = summary_path(path);
    emit_summary(&result.summary, &sidecar)?;
    Ok(sidecar)
}
