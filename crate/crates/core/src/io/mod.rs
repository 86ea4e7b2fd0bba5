//! File formats: model configuration (JSON), tick CSV, result tables (CSV
//! or JSON), correlation matrices and sector maps.

mod config;
mod table;
mod ticks;

pub use config::{parse_config, read_config, ConfigError, ModelConfig};
pub use table::{
    format_number, read_matrix, read_matrix_from, read_sectors, read_sectors_from, write_matrix,
    write_matrix_to, write_table, write_table_to, Cell, Table, TableFormat,
};
pub use ticks::{read_ticks, read_ticks_from, write_ticks, write_ticks_to, TICK_HEADER};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub(crate) fn schema(line: u64, message: impl Into<String>) -> Self {
        IoError::Schema {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// For errors on streams without a path.
    pub(crate) fn stream(source: std::io::Error) -> Self {
        IoError::Io {
            path: "<stream>".into(),
            source,
        }
    }

    pub(crate) fn with_path(self, path: &Path) -> Self {
        match self {
            IoError::Io { source, .. } => IoError::io(path, source),
            other => other,
        }
    }
}

/// Maps a csv error onto a schema error at its line, or a stream error.
pub(crate) fn from_csv(err: csv::Error) -> IoError {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IoError::stream(e),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            IoError::schema(line, format!("expected {expected_len} fields, found {len}"))
        }
        csv::ErrorKind::Utf8 { err, .. } => IoError::schema(line, format!("invalid UTF-8: {err}")),
        other => IoError::schema(line, format!("{other:?}")),
    }
}

pub(crate) fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, IoError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

pub(crate) fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, IoError> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|e| IoError::io(path, e))
}
