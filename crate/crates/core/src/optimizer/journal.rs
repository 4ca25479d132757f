//! Append-only JSONL trial journal; one [`TrialRecord`] per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::surrogate::TrialRecord;

pub struct JournalWriter {
    file: File,
    path: PathBuf,
}

impl JournalWriter {
    /// Creates (truncating) the journal at `path`.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(JournalWriter { file, path })
    }

    /// Writes one line and flushes it to the OS.
    pub fn append(&mut self, record: &TrialRecord) -> Result<()> {
        let mut line = to_line(record);
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn to_line(record: &TrialRecord) -> String {
    serde_json::to_string(record).expect("trial record serializes")
}

/// Reads every complete record. A torn final line (interrupted write) is
/// dropped; a malformed line anywhere else is an error.
pub fn read_journal(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TrialRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    field: format!("line {}", i + 1),
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
