//! `fdlab`: feature density experiments from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdlab::corpus::{self, AnnotatedSample};
use fdlab::density::{density_table, write_density_csv};
use fdlab::experiment::{
    self, analyze, read_report_csv, render_report, run_experiment_with, ExperimentConfig, ReportFormat, SmoteMode,
};
use fdlab::learn::Family;
use fdlab::variants::{derive_corpus, export_lines, DeriveOptions, Variant};
use fdlab::{Error, ErrorKind, Execution, Result};

#[derive(Parser)]
#[command(name = "fdlab", version, about = "Feature density and classifier benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the corpus; write corpus statistics.
    Ingest(Opts),
    /// Derive feature sequences, one text file per variant.
    Variants(Opts),
    /// Feature density per variant, sorted by FD.
    Density(Opts),
    /// Run the cross-validation grid and write the report.
    Run(Opts),
    /// Recompute FD correlations and t-tests from a written report.
    Correlate(Opts),
    /// Re-render a written CSV report.
    Report(Opts),
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// JSON experiment config; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Labeled CSV (`id,question,answer,label`).
    #[arg(long, value_name = "PATH")]
    samples: Option<PathBuf>,
    /// CoNLL-U Plus annotations.
    #[arg(long, value_name = "PATH")]
    annotations: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Comma-separated variant names, e.g. `TOK,LEM_POS,DEP_NER`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Comma-separated classifier families, e.g. `NB,SVM,CNN2L`.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    classifiers: Option<Vec<String>>,
    #[arg(long, value_name = "on|off|both")]
    smote: Option<String>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "csv|markdown|both")]
    format: Option<String>,
}

impl Opts {
    /// Config file (if any) with flag overrides applied.
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.samples, &self.annotations) {
            (Some(path), _, _) => ExperimentConfig::load(path)?,
            (None, Some(s), Some(a)) => ExperimentConfig::new(s, a),
            _ => {
                return Err(Error::Config(
                    "give --config, or both --samples and --annotations".into(),
                ))
            }
        };
        if let Some(s) = &self.samples {
            cfg.samples = s.clone();
        }
        if let Some(a) = &self.annotations {
            cfg.annotations = a.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(list) = &self.variants {
            cfg.variants = list
                .iter()
                .map(|v| v.parse::<Variant>().map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<_>>()?;
        }
        if let Some(list) = &self.classifiers {
            let keep: Vec<Family> = list
                .iter()
                .map(|f| f.parse::<Family>().map_err(|e| Error::Config(e.to_string())))
                .collect::<Result<_>>()?;
            // Keep hyperparameter overrides of families already in the config.
            let mut entries = Vec::new();
            for f in keep {
                let existing = cfg.classifiers.iter().find(|c| c.family() == f).cloned();
                entries.push(existing.unwrap_or(experiment::ClassifierEntry::Name(f)));
            }
            cfg.classifiers = entries;
        }
        if let Some(s) = &self.smote {
            cfg.smote = s.parse::<SmoteMode>()?;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(f) = &self.format {
            cfg.formats = f.parse::<ReportFormat>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Output directory and format for commands that only read a report.
    fn report_target(&self) -> Result<(PathBuf, ReportFormat)> {
        if self.config.is_some() || (self.samples.is_some() && self.annotations.is_some()) {
            let cfg = self.config()?;
            return Ok((cfg.out_dir, cfg.formats));
        }
        let out = self
            .out
            .clone()
            .ok_or_else(|| Error::Config("give --out or --config".into()))?;
        let format = self.format.as_deref().map_or(Ok(ReportFormat::Both), str::parse)?;
        Ok((out, format))
    }
}

fn load(cfg: &ExperimentConfig) -> Result<Vec<AnnotatedSample>> {
    corpus::load_corpus(&cfg.samples, &cfg.annotations).map_err(|e| e.in_stage("ingest"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn exec(cfg: &ExperimentConfig) -> Execution {
    if cfg.jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn ingest(opts: &Opts) -> Result<()> {
    let cfg = opts.config()?;
    let corpus = load(&cfg)?;
    let stats = corpus::corpus_stats(&corpus)?;
    println!(
        "{} samples, {} harmful ({:.2}%), {} tokens, {} unique",
        stats.n_samples,
        stats.n_harmful,
        100.0 * stats.harmful_fraction(),
        stats.n_tokens,
        stats.n_unique_tokens
    );
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("corpus.json"), &serde_json::to_string_pretty(&stats).map_err(Error::from)?)
}

fn variants(opts: &Opts) -> Result<()> {
    let cfg = opts.config()?;
    let corpus = load(&cfg)?;
    let dir = cfg.out_dir.join("variants");
    create_dir(&dir)?;
    let derive = DeriveOptions { fold_case: cfg.fold_case };
    cfg.jobs_scope(|| {
        for &v in &cfg.variants {
            let seqs = derive_corpus(&corpus, v, derive, exec(&cfg)).map_err(|e| e.in_stage("variants"))?;
            write(&dir.join(format!("{v}.txt")), &export_lines(&seqs))?;
        }
        Ok(())
    })
}

fn density(opts: &Opts) -> Result<()> {
    let cfg = opts.config()?;
    let corpus = load(&cfg)?;
    let derive = DeriveOptions { fold_case: cfg.fold_case };
    let table = cfg
        .jobs_scope(|| density_table(&corpus, &cfg.variants, derive, exec(&cfg)))
        .map_err(|e| e.in_stage("density"))?;
    for r in &table {
        println!("{:<16} {:>9} {:>10} {:.6}", r.variant.to_string(), r.unique, r.all, r.fd);
    }
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("density.csv"), &write_density_csv(&table))
}

fn run(opts: &Opts) -> Result<()> {
    let cfg = opts.config()?;
    let outcome = cfg.jobs_scope(|| run_experiment_with(&cfg, exec(&cfg)))?;
    println!(
        "{} cells trained, {} reused from {}",
        outcome.trained,
        outcome.reused,
        outcome.cell_dir.display()
    );
    for path in render_report(&outcome.report, cfg.formats, &cfg.out_dir).map_err(|e| e.in_stage("render"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn correlate(opts: &Opts) -> Result<()> {
    let (out, format) = opts.report_target()?;
    let mut report = read_report_csv(&out)?;
    let analysis = analyze(&report.provenance, &report.density, &report.grid);
    for r in &analysis.correlations {
        match r.correlation {
            Some(c) => println!("{:<6} {:<10} rho {:+.4}  p {:.4}  n {}", r.family.to_string(), r.pairing, c.rho, c.p_two_sided, c.n),
            None => println!("{:<6} {:<10} n/a", r.family.to_string(), r.pairing),
        }
    }
    for t in &analysis.t_tests {
        if let Some(r) = t.result {
            println!("{} & {} {} {:?}: t {:.4}  p {:.4}", t.a, t.b, t.pairing, t.mode, r.t, r.p_two_sided);
        }
    }
    report.correlations = analysis.correlations;
    report.t_tests = analysis.t_tests;
    report.notes = analysis.notes;
    for path in render_report(&report, format, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn report(opts: &Opts) -> Result<()> {
    let (out, format) = opts.report_target()?;
    let report = read_report_csv(&out)?;
    for path in render_report(&report, format, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

trait JobsScope {
    fn jobs_scope<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R;
}

impl JobsScope for ExperimentConfig {
    fn jobs_scope<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        exec(self).with_jobs(self.jobs, f)
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Runtime => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Ingest(o) => ingest(o),
        Command::Variants(o) => variants(o),
        Command::Density(o) => density(o),
        Command::Run(o) => run(o),
        Command::Correlate(o) => correlate(o),
        Command::Report(o) => report(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
