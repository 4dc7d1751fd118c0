use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy").join(file)
}

fn fdlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdlab")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A config over the toy corpus with the given extra JSON fields.
fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("cfg.json");
    let text = format!(
        r#"{{"samples":{:?},"annotations":{:?},"variants":["TOK","LEM"],"classifiers":["NB","LR"],
            "seed":5,"smote":"off","out_dir":"out"{extra}}}"#,
        toy("samples.csv"),
        toy("annotations.conllu"),
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_then_report_and_correlate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let cfg = cfg.to_str().unwrap();
    let out = fdlab(&["run", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = tmp.path().join("out/report.md");
    let md = std::fs::read_to_string(&report).unwrap();
    assert!(md.contains("| NB |"));
    assert!(tmp.path().join("out/csv/grid.csv").is_file());

    std::fs::remove_file(&report).unwrap();
    let out = fdlab(&["report", "--out", tmp.path().join("out").to_str().unwrap(), "--format", "markdown"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&report).unwrap(), md);

    let out = fdlab(&["correlate", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("NB"), "{text}");
    assert_eq!(std::fs::read_to_string(&report).unwrap(), md);
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out_dir = tmp.path().join("flagged");
    let out = fdlab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--variants",
        "POS",
        "--classifiers",
        "NB",
        "--smote",
        "on",
        "--jobs",
        "1",
        "--format",
        "csv",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(!out_dir.join("report.md").exists());
    let prov = std::fs::read_to_string(out_dir.join("csv/provenance.csv")).unwrap();
    assert!(prov.contains("seed,9"), "{prov}");
    assert!(prov.contains("smote,\"\"\"on\"\"\""), "{prov}");
    let grid = std::fs::read_to_string(out_dir.join("csv/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 2, "{grid}");
    assert!(grid.lines().nth(1).unwrap().starts_with("POS,NB,on,"));
}

#[test]
fn standalone_stages_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let base: Vec<String> = vec![
        "--samples".into(),
        toy("samples.csv").to_str().unwrap().into(),
        "--annotations".into(),
        toy("annotations.conllu").to_str().unwrap().into(),
        "--out".into(),
        out.to_str().unwrap().into(),
        "--variants".into(),
        "TOK,DEP_NER".into(),
    ];
    let run = |cmd: &str| {
        let mut args = vec![cmd.to_string()];
        args.extend(base.iter().cloned());
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        fdlab(&refs)
    };
    for cmd in ["ingest", "variants", "density"] {
        let o = run(cmd);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    assert!(out.join("corpus.json").is_file());
    assert!(out.join("variants/TOK.txt").is_file());
    assert!(out.join("variants/DEP_NER.txt").is_file());
    let density = std::fs::read_to_string(out.join("density.csv")).unwrap();
    assert!(density.starts_with("variant,unique,all,fd\nDEP_NER,"), "{density}");
    let tok = std::fs::read_to_string(out.join("variants/TOK.txt")).unwrap();
    assert_eq!(tok.lines().count(), 200);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();

    // Usage and config errors.
    assert_eq!(code(&fdlab(&["nonsense"])), 1);
    assert_eq!(code(&fdlab(&["run"])), 1);
    assert_eq!(code(&fdlab(&["run", "--config", "/no/such/config.json"])), 1);
    let cfg = write_config(tmp.path(), r#","classifiers":[]"#);
    let bad = std::fs::read_to_string(&cfg).unwrap().replace(r#""classifiers":["NB","LR"],"#, "");
    std::fs::write(&cfg, bad).unwrap();
    let out = fdlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let cfg = write_config(tmp.path(), "");
    let out = fdlab(&["run", "--config", cfg.to_str().unwrap(), "--smote", "sometimes"]);
    assert_eq!(code(&out), 1);
    let out = fdlab(&["run", "--config", cfg.to_str().unwrap(), "--classifiers", "XGB"]);
    assert_eq!(code(&out), 1);

    // Data error: malformed labeled CSV.
    let samples = tmp.path().join("bad.csv");
    std::fs::write(&samples, "id,question,answer,label\nx,hi,there,maybe\n").unwrap();
    let out = fdlab(&[
        "ingest",
        "--samples",
        samples.to_str().unwrap(),
        "--annotations",
        toy("annotations.conllu").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("ingest"));

    // Runtime error: more folds than harmful samples.
    let out = fdlab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let many = write_config(tmp.path(), r#","folds":50"#);
    let out = fdlab(&["run", "--config", many.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("grid"));

    assert_eq!(code(&fdlab(&["--help"])), 0);
}
