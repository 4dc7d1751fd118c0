mod common;

use std::collections::BTreeMap;

use common::{toy_config, toy_dir};
use fdlab::experiment::{
    parse_cell_csv, parse_report_csv, read_report_csv, render_markdown, render_report, report_csv_files,
    run_experiment_with, ClassifierEntry, ExperimentConfig, ReportFormat, SmoteMode,
};
use fdlab::learn::Family;
use fdlab::{Error, ErrorKind, Execution};

fn read_tree(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn grid_is_populated_and_traceable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let outcome = run_experiment_with(&cfg, Execution::Parallel).unwrap();
    let r = &outcome.report;
    // 3 variants x 2 families x (plain + SMOTE) x 5 folds.
    assert_eq!(outcome.trained, 60);
    assert_eq!(r.folds.len(), 60);
    assert_eq!(r.grid.len(), 12);
    for g in &r.grid {
        let folds: Vec<_> = r
            .folds
            .iter()
            .filter(|c| c.variant == g.variant && c.family == g.family && c.smote == g.smote)
            .collect();
        assert_eq!(folds.len(), 5);
        let mean_f1 = folds.iter().map(|c| c.metrics.f1).sum::<f64>() / 5.0;
        assert!((mean_f1 - g.metrics.f1).abs() < 1e-12);
    }
    let files = std::fs::read_dir(&outcome.cell_dir).unwrap().count();
    assert_eq!(files, 60);
    for entry in std::fs::read_dir(&outcome.cell_dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let cells = parse_cell_csv(&text).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(r.folds.contains(&cells[0]));
    }
    assert!(r.density.windows(2).all(|w| w[0].fd >= w[1].fd));
    assert_eq!(r.correlations.len(), 4);
    assert!(r.correlations.iter().all(|c| c.correlation.is_some()));
    // Two families: one pair, two pairings, two modes.
    assert_eq!(r.t_tests.len(), 4);
}

#[test]
fn rerun_is_byte_identical_and_resume_skips_training() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = toy_config(a.path());
    let cfg_b = toy_config(b.path());
    let ra = run_experiment_with(&cfg_a, Execution::Parallel).unwrap();
    let rb = run_experiment_with(&cfg_b, Execution::Sequential).unwrap();
    render_report(&ra.report, ReportFormat::Both, a.path()).unwrap();
    render_report(&rb.report, ReportFormat::Both, b.path()).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));

    let before = read_tree(a.path());
    std::fs::remove_file(a.path().join("report.md")).unwrap();
    std::fs::remove_dir_all(a.path().join("csv")).unwrap();
    let again = run_experiment_with(&cfg_a, Execution::Parallel).unwrap();
    assert_eq!(again.trained, 0);
    assert_eq!(again.reused, 60);
    render_report(&again.report, ReportFormat::Both, a.path()).unwrap();
    assert_eq!(read_tree(a.path()), before);
}

#[test]
fn partial_cells_are_retrained_only_where_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let first = run_experiment_with(&cfg, Execution::Sequential).unwrap();
    let mut removed = 0;
    for (i, entry) in std::fs::read_dir(&first.cell_dir).unwrap().enumerate() {
        if i % 7 == 0 {
            std::fs::remove_file(entry.unwrap().path()).unwrap();
            removed += 1;
        }
    }
    let second = run_experiment_with(&cfg, Execution::Sequential).unwrap();
    assert_eq!(second.trained, removed);
    assert_eq!(second.report, first.report);
}

#[test]
fn csv_report_round_trips_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let report = run_experiment_with(&cfg, Execution::Parallel).unwrap().report;
    let files: BTreeMap<String, String> = report_csv_files(&report)
        .unwrap()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    assert_eq!(parse_report_csv(&files).unwrap(), report);
    render_report(&report, ReportFormat::Csv, tmp.path()).unwrap();
    assert_eq!(read_report_csv(tmp.path()).unwrap(), report);
    assert!(!tmp.path().join("report.md").exists());
}

#[test]
fn config_hash_tracks_semantic_fields_only() {
    let tmp = tempfile::tempdir().unwrap();
    let base = toy_config(tmp.path());
    let h = base.hash().unwrap();

    let mut same = base.clone();
    same.out_dir = tmp.path().join("elsewhere");
    same.jobs = 3;
    same.formats = ReportFormat::Markdown;
    same.classifiers = vec![
        ClassifierEntry::Custom {
            family: Family::Nb,
            params: serde_json::json!({ "alpha": 1.0 }),
        },
        ClassifierEntry::Name(Family::Lr),
    ];
    assert_eq!(same.hash().unwrap(), h);

    let mut off = base.clone();
    off.smote = SmoteMode::Off;
    let mut off_k = off.clone();
    off_k.smote_k = 3;
    assert_eq!(off.hash().unwrap(), off_k.hash().unwrap());

    let changes: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.seed += 1),
        Box::new(|c| c.folds = 4),
        Box::new(|c| c.smote = SmoteMode::Off),
        Box::new(|c| c.smote_k = 3),
        Box::new(|c| c.class_weighting = false),
        Box::new(|c| c.l2_normalize = true),
        Box::new(|c| c.fold_case = true),
        Box::new(|c| c.min_df = 2),
        Box::new(|c| c.variants.pop().map(drop).unwrap()),
        Box::new(|c| {
            c.classifiers[0] = ClassifierEntry::Custom {
                family: Family::Nb,
                params: serde_json::json!({ "alpha": 0.5 }),
            }
        }),
    ];
    for (i, change) in changes.iter().enumerate() {
        let mut c = base.clone();
        change(&mut c);
        assert_ne!(c.hash().unwrap(), h, "change {i} kept the hash");
    }

    let copy = tempfile::tempdir().unwrap();
    let samples = copy.path().join("s.csv");
    std::fs::copy(&base.samples, &samples).unwrap();
    let mut moved = base.clone();
    moved.samples = samples.clone();
    assert_eq!(moved.hash().unwrap(), h);
    let mut text = std::fs::read_to_string(&samples).unwrap();
    text = text.replacen("Do you", "Did you", 1);
    std::fs::write(&samples, text).unwrap();
    assert_ne!(moved.hash().unwrap(), h);
}

#[test]
fn zero_classifiers_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.classifiers.clear();
    let err = run_experiment_with(&cfg, Execution::Sequential).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn single_cell_report_has_one_row_f1_table() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.variants = vec!["TOK".parse().unwrap()];
    cfg.classifiers = vec![ClassifierEntry::Name(Family::Nb)];
    cfg.smote = SmoteMode::Off;
    let report = run_experiment_with(&cfg, Execution::Sequential).unwrap().report;
    let md = render_markdown(&report);
    let section = md.split("## F1 summary").nth(1).unwrap();
    let table: Vec<&str> = section
        .lines()
        .skip_while(|l| !l.starts_with('|'))
        .take_while(|l| l.starts_with('|'))
        .collect();
    assert_eq!(table.len(), 3, "header, rule, one row: {table:?}");
    assert!(table[2].starts_with("| NB |"));
    // A single variant cannot be correlated; the report says so.
    assert!(report.correlations.iter().all(|c| c.correlation.is_none()));
    assert!(!report.notes.is_empty());
}

#[test]
fn markdown_marks_best_per_column_and_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let report = run_experiment_with(&cfg, Execution::Parallel).unwrap().report;
    let md = render_markdown(&report);
    assert!(md.contains("**"));
    assert!(md.contains("<u>"));
    for heading in [
        "## Provenance",
        "## Corpus",
        "## Feature density",
        "## Metrics without SMOTE",
        "## F1 with SMOTE",
        "## Correlation of FD with F1",
        "## t-tests",
        "## Winners",
    ] {
        assert!(md.contains(heading), "missing {heading}");
    }
    assert!(md.contains(&report.provenance.config_hash));
}

#[test]
fn stage_errors_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let samples = tmp.path().join("s.csv");
    let mut text = std::fs::read_to_string(toy_dir().join("samples.csv")).unwrap();
    text.push_str("extra,what,ever,0\n");
    std::fs::write(&samples, text).unwrap();
    let mut cfg = toy_config(tmp.path());
    cfg.samples = samples;
    let err = run_experiment_with(&cfg, Execution::Sequential).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "ingest", .. }), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
    assert!(err.to_string().starts_with("ingest: "));

    let mut cfg = toy_config(tmp.path());
    cfg.folds = 20;
    let err = run_experiment_with(&cfg, Execution::Sequential).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "grid", .. }), "{err}");
}

#[test]
fn unwritable_output_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(&tmp.path().join("out"));
    let report = run_experiment_with(&cfg, Execution::Sequential).unwrap().report;
    let file = tmp.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    assert!(render_report(&report, ReportFormat::Both, &file).is_err());
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let tmp = tempfile::tempdir().unwrap();
    for f in ["samples.csv", "annotations.conllu"] {
        std::fs::copy(toy_dir().join(f), tmp.path().join(f)).unwrap();
    }
    let path = tmp.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"samples":"samples.csv","annotations":"annotations.conllu","classifiers":["NB"],"out_dir":"o"}"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.samples, tmp.path().join("samples.csv"));
    assert_eq!(cfg.out_dir, tmp.path().join("o"));
    cfg.validate().unwrap();
}
