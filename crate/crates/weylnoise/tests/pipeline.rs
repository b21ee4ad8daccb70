use std::fs;
use std::path::Path;

use weylnoise::config::ExperimentConfig;
use weylnoise::record::{read_csv, EigenRow, Manifest, EIGEN_DIR, MANIFEST_FILE, PLOT_DIR, RESULTS_FILE, SUMMARY_FILE};
use weylnoise::{emit_outputs, replay, run_experiment, ResultRow, RunError, RunRecord, SummaryRow};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

fn perturb_config() -> ExperimentConfig {
    config(
        r#"{"schema_version": 1, "experiment": "perturb", "h_list": [0.1], "trials": 4, "K": {"radius_sq": 16.0}, "master_seed": 11,
            "domains": [{"shape": "disc", "center": [0.45, 0.45], "radius": 0.3}],
            "params": {"volume_samples": 65536, "winding_trials": 1, "eigen_trials": 2}}"#,
    )
}

fn sweep_config() -> ExperimentConfig {
    config(
        r#"{"schema_version": 1, "experiment": "weyl-sweep", "h_list": [0.1, 0.07, 0.05], "trials": 20, "K": {"radius_sq": 16.0}, "master_seed": 3,
            "domains": [
                {"shape": "rect", "re": [0.3, 0.8], "im": [0.05, 0.2]},
                {"shape": "disc", "center": [0.5, 0.5], "radius": 0.2},
                {"shape": "polygon", "vertices": [[0.2, 0.3], [0.7, 0.3], [0.45, 0.7]]}
            ],
            "params": {"volume_samples": 65536, "winding_trials": 0, "eigen_trials": 0}}"#,
    )
}

fn run_and_emit(cfg: &ExperimentConfig, dir: &Path) -> RunRecord {
    let rec = run_experiment(cfg, 2).unwrap();
    emit_outputs(&rec, dir).unwrap();
    rec
}

#[test]
fn same_config_and_seed_give_identical_payloads() {
    let cfg = perturb_config();
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 3).unwrap();
    assert!(!a.results.is_empty());
    assert!(a.payload_eq(&b));
}

#[test]
fn cubic_delta_is_rejected_at_load() {
    let mut cfg = perturb_config();
    cfg.delta_rule = serde_json::from_str(r#"{"kind": "power", "exponent": 3.0}"#).unwrap();
    match run_experiment(&cfg, 1) {
        Err(RunError::Config(e)) => assert!(e.to_string().contains("delta_rule")),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn sweep_emits_one_summary_row_per_h_and_domain() {
    let rec = run_experiment(&sweep_config(), 4).unwrap();
    assert_eq!(rec.summary.len(), 9);
    assert_eq!(rec.results.len() + rec.violations.len() * 3, 3 * 3 * 20);
    for row in &rec.summary {
        assert!(row.weyl_pred > 0.0);
    }
}

#[test]
fn tables_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_and_emit(&sweep_config(), dir.path());
    let results: Vec<ResultRow> = read_csv(&dir.path().join(RESULTS_FILE)).unwrap();
    let summary: Vec<SummaryRow> = read_csv(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(results, rec.results);
    assert_eq!(summary, rec.summary);
    let header = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(header.lines().next().unwrap(), "h,delta,domain_id,n_count,weyl_pred,diff,seed");
}

#[test]
fn empty_record_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"schema_version": 1, "experiment": "spectrum", "h_list": [0.1], "master_seed": 0}"#);
    let rec = RunRecord::new(cfg, 1, Vec::new());
    let files = emit_outputs(&rec, dir.path()).unwrap();
    assert!(files.contains(&MANIFEST_FILE.to_string()));
    let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(text, "h,delta,domain_id,n_count,weyl_pred,diff,seed\n");
    assert!(!dir.path().join(EIGEN_DIR).exists());
}

#[test]
fn plots_are_xml_with_one_marker_per_trusted_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_and_emit(&perturb_config(), dir.path());
    assert_eq!(rec.spectra.len(), 2);
    for s in &rec.spectra {
        let eig: Vec<EigenRow> = read_csv(&dir.path().join(EIGEN_DIR).join(format!("{}.csv", s.name))).unwrap();
        assert_eq!(eig, s.rows);
        let text = fs::read_to_string(dir.path().join(PLOT_DIR).join(format!("{}.svg", s.name))).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let markers = doc.descendants().filter(|n| n.attribute("class") == Some("eig")).count();
        assert_eq!(markers, s.rows.iter().filter(|r| r.trusted).count());
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("domain")).count(), 1);
        assert!(doc.descendants().any(|n| n.attribute("class") == Some("sigma-boundary")));
    }
}

#[test]
fn fresh_run_replays_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&perturb_config(), dir.path());
    let report = replay(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(report.matched(), "{:?}", report.mismatch);
    assert!(report.checked.iter().any(|f| f == RESULTS_FILE));
}

#[test]
fn altered_seed_is_reported_at_the_first_row() {
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&perturb_config(), dir.path());
    let path = dir.path().join(MANIFEST_FILE);
    let mut m = Manifest::load(&path).unwrap();
    m.master_seed = 12;
    m.config.master_seed = 12;
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let report = replay(&path).unwrap();
    let mm = report.mismatch.unwrap();
    assert_eq!((mm.file.as_str(), mm.row), (RESULTS_FILE, 1));
}

#[test]
fn replay_without_eigenvalue_files_checks_results() {
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&perturb_config(), dir.path());
    fs::remove_dir_all(dir.path().join(EIGEN_DIR)).unwrap();
    let report = replay(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(report.matched());
    assert!(report.checked.iter().all(|f| !f.starts_with(EIGEN_DIR)));
}

#[test]
fn manifest_names_every_guard_with_a_margin() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = perturb_config();
    cfg.params.deformation = Some(serde_json::from_str(r#"{"shift": [3.0, 3.0], "radius": 0.8}"#).unwrap());
    cfg.phase_box = 3.0;
    let rec = run_and_emit(&cfg, dir.path());
    let m = Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    for name in ["delta_rule", "epsilon.lower", "epsilon.upper", "K"] {
        let g = m.guards.iter().find(|g| g.name == name).unwrap_or_else(|| panic!("missing guard {name}"));
        assert!(g.margin.is_some());
    }
    assert!(rec.metric("boundary.points", "domain=0").is_some() || !rec.violations.is_empty());
}

#[test]
fn shipped_configs_load_and_pass_their_guards() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.experiment.name());
        seen.push(cfg.experiment);
    }
    assert_eq!(seen.len(), weylnoise::Experiment::ALL.len());
}
