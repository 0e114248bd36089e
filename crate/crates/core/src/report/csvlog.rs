use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Append-only CSV file with a fixed header. The header is written when the
/// log is created; rows are appended and flushed one call at a time.
#[derive(Debug, Clone)]
pub struct CsvLog {
    path: PathBuf,
    width: usize,
}

impl CsvLog {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(header).map_err(|e| csv_err(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(CsvLog {
            path: path.to_path_buf(),
            width: header.len(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<S: AsRef<str>>(&mut self, row: &[S]) -> Result<()> {
        self.append_all(std::slice::from_ref(&row))
    }

    pub fn append_all<S: AsRef<str>, R: AsRef<[S]>>(&mut self, rows: &[R]) -> Result<()> {
        let file = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in rows {
            let row = row.as_ref();
            if row.len() != self.width {
                return Err(Error::Data(format!(
                    "{}: row has {} fields, header has {}",
                    self.path.display(),
                    row.len(),
                    self.width
                )));
            }
            w.write_record(row.iter().map(|s| s.as_ref()))
                .map_err(|e| csv_err(&self.path, e))?;
        }
        w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Formats a metric for CSV: shortest round-trip form, empty when missing or
/// non-finite.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}
