//! CSV ingestion and atomic file output.

use crate::CliError;
use std::path::Path;

/// Parsed numeric table: header names plus row-major values.
pub(crate) struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data(format!("column '{name}' not found in the data file")))
    }
}

/// Read a numeric CSV with a required header row. Comment lines starting
/// with '#' are skipped; a leading `# compresid csv v<N>` line is checked
/// against the supported schema version.
pub(crate) fn read_table(path: &Path) -> Result<Table, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if let Some(first) = raw.lines().next() {
        if let Some(rest) = first.strip_prefix("# compresid csv v") {
            let version: String = rest.chars().take_while(char::is_ascii_digit).collect();
            if version != "1" {
                return Err(CliError::data(format!(
                    "unsupported schema version v{version} in {}",
                    path.display()
                )));
            }
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::data(format!("{}: empty header row", path.display())));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::data(format!(
                "row {}: expected {} fields, got {}",
                i + 1,
                headers.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::data(format!(
                    "row {}, column '{}': not a number: '{field}'",
                    i + 1,
                    headers[j]
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    Ok(Table { headers, rows })
}

/// Write via a temp file in the same directory plus rename, so a failed
/// run never leaves a partial output behind.
pub(crate) fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("invalid output path {}", path.display())))?;
    let tmp_name = format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id());
    let tmp_path = match dir {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    let write = || -> std::io::Result<()> {
        std::fs::write(&tmp_path, content)?;
        std::fs::rename(&tmp_path, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp_path);
        CliError::data(format!("writing {}: {e}", path.display()))
    })
}
