//! In-memory run record and its on-disk form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GuardReport, SCHEMA_VERSION};
use crate::svg;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EIGEN_DIR: &str = "eigenvalues";
pub const PLOT_DIR: &str = "plots";

pub const RESULTS_HEADER: [&str; 7] = ["h", "delta", "domain_id", "n_count", "weyl_pred", "diff", "seed"];
pub const SUMMARY_HEADER: [&str; 10] = [
    "h",
    "delta",
    "domain_id",
    "trials",
    "weyl_pred",
    "weyl_std",
    "unperturbed_count",
    "median_count",
    "median_abs_diff",
    "median_rel_diff",
];
pub const METRICS_HEADER: [&str; 5] = ["metric", "h", "key", "value", "reference"];
pub const EIGEN_HEADER: [&str; 3] = ["re", "im", "trusted"];

/// One eigenvalue census: trial × domain × h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub h: f64,
    pub delta: f64,
    pub domain_id: usize,
    pub n_count: usize,
    pub weyl_pred: f64,
    pub diff: f64,
    /// Seed of the Gaussian block for this trial.
    pub seed: u64,
}

/// Aggregate over trials for one h × domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub h: f64,
    pub delta: f64,
    pub domain_id: usize,
    pub trials: usize,
    pub weyl_pred: f64,
    pub weyl_std: f64,
    pub unperturbed_count: usize,
    pub median_count: f64,
    pub median_abs_diff: f64,
    /// Absent when the prediction is zero.
    pub median_rel_diff: Option<f64>,
}

/// Named scalar statistic with an optional reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub h: Option<f64>,
    pub key: String,
    pub value: f64,
    pub reference: Option<f64>,
}

impl MetricRow {
    pub fn new(metric: &str, h: Option<f64>, key: impl Into<String>, value: f64, reference: Option<f64>) -> Self {
        MetricRow { metric: metric.into(), h, key: key.into(), value, reference }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub re: f64,
    pub im: f64,
    pub trusted: bool,
}

/// Eigenvalues of one trial at one h.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    /// File stem under `eigenvalues/` and `plots/`.
    pub name: String,
    pub h: f64,
    pub trial: u64,
    pub rows: Vec<EigenRow>,
}

/// A per-trial or per-item numerical failure that did not stop the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub stage: String,
    pub h: Option<f64>,
    pub trial: Option<u64>,
    pub domain_id: Option<usize>,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub threads: usize,
    pub guards: Vec<GuardReport>,
    pub results: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub metrics: Vec<MetricRow>,
    pub spectra: Vec<SpectrumRecord>,
    pub violations: Vec<Violation>,
    pub timings: Vec<Timing>,
}

impl RunRecord {
    pub fn new(config: ExperimentConfig, threads: usize, guards: Vec<GuardReport>) -> Self {
        RunRecord {
            config,
            version: VERSION.into(),
            threads,
            guards,
            results: Vec::new(),
            summary: Vec::new(),
            metrics: Vec::new(),
            spectra: Vec::new(),
            violations: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Equality of everything except wall-clock timings.
    pub fn payload_eq(&self, other: &RunRecord) -> bool {
        self.config == other.config
            && self.results == other.results
            && self.summary == other.summary
            && self.metrics == other.metrics
            && self.spectra == other.spectra
            && self.violations == other.violations
            && self.guards == other.guards
    }

    pub fn metric(&self, metric: &str, key: &str) -> Option<&MetricRow> {
        self.metrics.iter().find(|m| m.metric == metric && m.key == key)
    }

    pub fn metrics_named<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.metrics.iter().filter(move |m| m.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub guards: Vec<GuardReport>,
    pub violations: Vec<Violation>,
    pub timings: Vec<Timing>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, OutputError> {
        let text = fs::read_to_string(path).map_err(|e| OutputError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| OutputError::Json { path: path.to_path_buf(), source: e })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl OutputError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        OutputError::Io { path: path.to_path_buf(), source }
    }
}

/// CSV text with an explicit header, so empty tables keep their columns.
pub fn to_csv<R: Serialize>(header: &[&str], rows: &[R]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>, OutputError> {
    let wrap = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().collect::<Result<_, _>>().map_err(wrap)
}

fn write(path: &Path, text: &str) -> Result<(), OutputError> {
    fs::write(path, text).map_err(|e| OutputError::io(path, e))
}

fn csv_text<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<String, OutputError> {
    to_csv(header, rows).map_err(|source| OutputError::Csv { path: path.to_path_buf(), source })
}

/// Writes the manifest, the CSV tables, eigenvalue files and plots under
/// `dir`. Returns the written paths relative to `dir`.
pub fn emit_outputs(record: &RunRecord, dir: &Path) -> Result<Vec<String>, OutputError> {
    fs::create_dir_all(dir).map_err(|e| OutputError::io(dir, e))?;
    let mut files = Vec::new();
    let tables: [(&str, String); 3] = [
        (RESULTS_FILE, csv_text(&dir.join(RESULTS_FILE), &RESULTS_HEADER, &record.results)?),
        (SUMMARY_FILE, csv_text(&dir.join(SUMMARY_FILE), &SUMMARY_HEADER, &record.summary)?),
        (METRICS_FILE, csv_text(&dir.join(METRICS_FILE), &METRICS_HEADER, &record.metrics)?),
    ];
    for (name, text) in &tables {
        write(&dir.join(name), text)?;
        files.push(name.to_string());
    }
    if !record.spectra.is_empty() {
        let eig = dir.join(EIGEN_DIR);
        let plots = dir.join(PLOT_DIR);
        fs::create_dir_all(&eig).map_err(|e| OutputError::io(&eig, e))?;
        fs::create_dir_all(&plots).map_err(|e| OutputError::io(&plots, e))?;
        let symbol = record.config.symbol.build().ok();
        let domains = record.config.domain_specs().unwrap_or_default();
        for s in &record.spectra {
            let path = eig.join(format!("{}.csv", s.name));
            write(&path, &csv_text(&path, &EIGEN_HEADER, &s.rows)?)?;
            files.push(format!("{EIGEN_DIR}/{}.csv", s.name));
            let title = format!("{} h = {} trial {}", record.config.experiment, s.h, s.trial);
            let image = svg::scatter(&s.rows, &domains, symbol.as_ref(), record.config.phase_box, &title);
            let path = plots.join(format!("{}.svg", s.name));
            write(&path, &image)?;
            files.push(format!("{PLOT_DIR}/{}.svg", s.name));
        }
    }
    files.push(MANIFEST_FILE.into());
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "weylnoise".into(),
        version: record.version.clone(),
        master_seed: record.config.master_seed,
        threads: record.threads,
        config: record.config.clone(),
        guards: record.guards.clone(),
        violations: record.violations.clone(),
        timings: record.timings.clone(),
        files: files.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| OutputError::Json { path: path.clone(), source: e })?;
    write(&path, &text)?;
    Ok(files)
}

/// The CSV tables of a record as `(file name, text)`, in the order replay
/// checks them.
pub fn rendered_tables(record: &RunRecord) -> Result<Vec<(String, String)>, csv::Error> {
    let mut out = vec![
        (RESULTS_FILE.to_string(), to_csv(&RESULTS_HEADER, &record.results)?),
        (SUMMARY_FILE.to_string(), to_csv(&SUMMARY_HEADER, &record.summary)?),
        (METRICS_FILE.to_string(), to_csv(&METRICS_HEADER, &record.metrics)?),
    ];
    for s in &record.spectra {
        out.push((format!("{EIGEN_DIR}/{}.csv", s.name), to_csv(&EIGEN_HEADER, &s.rows)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_shortest_round_trip_text() {
        let rows = [ResultRow { h: 0.1, delta: 6.25e-6, domain_id: 0, n_count: 3, weyl_pred: 1.0 / 3.0, diff: -0.0, seed: u64::MAX }];
        let text = to_csv(&RESULTS_HEADER, &rows).unwrap();
        let line = text.lines().nth(1).unwrap();
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], "0.1");
        assert_eq!(cells[4].parse::<f64>().unwrap().to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(cells[6], u64::MAX.to_string());
    }

    #[test]
    fn empty_table_keeps_header() {
        let text = to_csv::<MetricRow>(&METRICS_HEADER, &[]).unwrap();
        assert_eq!(text, "metric,h,key,value,reference\n");
    }
}
