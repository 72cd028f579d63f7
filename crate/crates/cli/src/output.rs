use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// CSV writer with `\n` line endings that reports errors against its path.
pub struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvFile {
    pub fn create(path: impl Into<PathBuf>, header: &[&str]) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        let mut out = Self { path, writer };
        out.write_fields(header.iter().copied())?;
        Ok(out)
    }

    fn write_fields<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let path = &self.path;
        self.writer.write_record(fields).map_err(|e| CliError::Csv {
            path: path.clone(),
            message: e.to_string(),
        })
    }

    /// Floats use the shortest representation that parses back exactly.
    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.write_fields(values.iter().map(|v| v.to_string()))
    }

    pub fn text_row(&mut self, values: &[String]) -> Result<()> {
        self.write_fields(values)
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Keeps letters, digits, `.` and `-`; everything else becomes `_`.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}
