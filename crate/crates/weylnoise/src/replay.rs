//! Re-running a stored manifest and comparing its tables cell by cell.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::SCHEMA_VERSION;
use crate::record::{rendered_tables, Manifest, OutputError, RunRecord, MANIFEST_FILE, RESULTS_FILE};
use crate::runner::{run_experiment, RunError};

/// First cell where a stored table and the re-run disagree. `row` counts
/// data rows from 1; row 0 is the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub file: String,
    pub row: usize,
    pub column: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {} column {}: stored {:?}, replayed {:?}",
            self.file, self.row, self.column, self.expected, self.actual
        )
    }
}

#[derive(Debug)]
pub struct ReplayReport {
    pub record: RunRecord,
    /// Tables compared, relative to the manifest directory.
    pub checked: Vec<String>,
    pub mismatch: Option<Mismatch>,
}

impl ReplayReport {
    pub fn matched(&self) -> bool {
        self.mismatch.is_none()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("csv rendering failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest schema version {0} is not supported (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("required table {0} is missing")]
    Missing(PathBuf),
}

fn rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    r.records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()).unwrap_or_else(|e| vec![format!("<unparsable: {e}>")]))
        .collect()
}

/// First differing cell of two CSV texts, with columns named from the
/// stored header.
pub fn first_difference(file: &str, stored: &str, replayed: &str) -> Option<Mismatch> {
    let (a, b) = (rows(stored), rows(replayed));
    let header = a.first().cloned().unwrap_or_default();
    let missing = "<missing>".to_string();
    for i in 0..a.len().max(b.len()) {
        let (ra, rb) = (a.get(i), b.get(i));
        let width = ra.map_or(0, Vec::len).max(rb.map_or(0, Vec::len)).max(1);
        for j in 0..width {
            let ca = ra.and_then(|r| r.get(j)).unwrap_or(&missing);
            let cb = rb.and_then(|r| r.get(j)).unwrap_or(&missing);
            if ca != cb {
                return Some(Mismatch {
                    file: file.into(),
                    row: i,
                    column: header.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                    expected: ca.clone(),
                    actual: cb.clone(),
                });
            }
        }
    }
    None
}

/// Re-runs the configuration stored in `manifest_path` with its seed and
/// thread count, and compares every stored table that exists. Only
/// `results.csv` is required.
pub fn replay(manifest_path: &Path) -> Result<ReplayReport, ReplayError> {
    let manifest = Manifest::load(manifest_path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(ReplayError::Schema(manifest.schema_version));
    }
    if manifest.config.schema_version != SCHEMA_VERSION {
        return Err(ReplayError::Schema(manifest.config.schema_version));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let results = dir.join(RESULTS_FILE);
    if !results.exists() {
        return Err(ReplayError::Missing(results));
    }
    let record = run_experiment(&manifest.config, manifest.threads)?;
    let mut checked = Vec::new();
    let mut mismatch = None;
    if manifest.master_seed != manifest.config.master_seed {
        mismatch = Some(Mismatch {
            file: MANIFEST_FILE.into(),
            row: 0,
            column: "master_seed".into(),
            expected: manifest.master_seed.to_string(),
            actual: manifest.config.master_seed.to_string(),
        });
    }
    for (name, text) in rendered_tables(&record)? {
        let path = dir.join(&name);
        if !path.exists() {
            continue;
        }
        let stored = fs::read_to_string(&path).map_err(|source| OutputError::Io { path: path.clone(), source })?;
        checked.push(name.clone());
        if mismatch.is_none() {
            mismatch = first_difference(&name, &stored, &text);
        }
    }
    Ok(ReplayReport { record, checked, mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_first_divergent_cell() {
        let a = "h,n\n0.1,3\n0.2,4\n";
        let b = "h,n\n0.1,3\n0.2,5\n";
        let m = first_difference("t.csv", a, b).unwrap();
        assert_eq!((m.row, m.column.as_str(), m.expected.as_str(), m.actual.as_str()), (2, "n", "4", "5"));
        assert!(first_difference("t.csv", a, a).is_none());
    }

    #[test]
    fn extra_rows_are_a_mismatch() {
        let m = first_difference("t.csv", "h\n1\n", "h\n1\n2\n").unwrap();
        assert_eq!((m.row, m.expected.as_str()), (2, "<missing>"));
    }
}
