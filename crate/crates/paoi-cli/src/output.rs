//! Result emission: comma-delimited tables with a comment-prefixed manifest
//! block, plus the standalone manifest file a run can be replayed from.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::CliError;

/// A table with a fixed header; cells are preformatted strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Fixed-width scientific notation keeps columns diff-friendly and carries
/// the full precision a replayed run must reproduce.
pub fn fnum(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the result file (manifest block as `#` comments, then the table)
/// and the bare manifest alongside it.
pub fn write_output(out: &Path, manifest: &str, table: &Table) -> Result<(), CliError> {
    let mut text = String::new();
    for line in manifest.lines() {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(&table.render());
    fs::write(out, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
    let mpath = manifest_path(out);
    fs::write(&mpath, manifest)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", mpath.display())))?;
    Ok(())
}
