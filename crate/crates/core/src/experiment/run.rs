use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::{self, ExperimentReport, GridCell, Provenance};
use super::{ExperimentConfig, ARTIFACT_VERSION};
use crate::balance::SmoteConfig;
use crate::corpus::{self, corpus_stats};
use crate::density::{feature_density, sort_by_fd};
use crate::error::{Error, Result};
use crate::evaluate::{self, CvOptions, FoldPlan, Metrics};
use crate::exec::Execution;
use crate::learn::{Family, ModelSpec};
use crate::seed;
use crate::variants::{derive_corpus, DeriveOptions, FeatureSequence, Variant};
use crate::vectorize::TfidfOptions;

pub const CELL_HEADER: &str = "variant,family,fold,acc,prec,rec,f1,auc,smote,seed";

/// Test-fold metrics of one (variant, family, fold, SMOTE) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub variant: Variant,
    pub family: Family,
    pub fold: usize,
    pub metrics: Metrics,
    pub smote: bool,
    pub seed: u64,
}

impl CellResult {
    pub(crate) fn csv_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.variant,
            self.family,
            self.fold,
            m.acc,
            m.prec,
            m.rec,
            m.f1,
            m.auc,
            on_off(self.smote),
            self.seed
        )
    }
}

pub(crate) fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

pub(crate) fn parse_on_off(s: &str) -> Option<bool> {
    match s {
        "on" => Some(true),
        "off" => Some(false),
        _ => None,
    }
}

/// Renders cells as CSV with [`CELL_HEADER`]; floats use the shortest
/// representation that parses back exactly.
pub fn write_cell_csv(cells: &[CellResult]) -> String {
    let mut out = format!("{CELL_HEADER}\n");
    for c in cells {
        out.push_str(&c.csv_row());
        out.push('\n');
    }
    out
}

pub fn parse_cell_csv(text: &str) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::MalformedRow { row: 1, msg: e.to_string() })?;
    if header.iter().collect::<Vec<_>>().join(",") != CELL_HEADER {
        return Err(Error::MalformedRow {
            row: 1,
            msg: format!("expected header {CELL_HEADER}"),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |msg: String| Error::MalformedRow { row: i + 2, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64> { rec[j].parse().map_err(|_| bad(format!("bad number {:?}", &rec[j]))) };
        out.push(CellResult {
            variant: rec[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            family: rec[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            fold: rec[2].parse().map_err(|_| bad(format!("bad fold {:?}", &rec[2])))?,
            metrics: Metrics {
                acc: num(3)?,
                prec: num(4)?,
                rec: num(5)?,
                f1: num(6)?,
                auc: num(7)?,
            },
            smote: parse_on_off(&rec[8]).ok_or_else(|| bad(format!("bad smote flag {:?}", &rec[8])))?,
            seed: rec[9].parse().map_err(|_| bad(format!("bad seed {:?}", &rec[9])))?,
        });
    }
    Ok(out)
}

/// Model seed of a grid cell. SMOTE and plain runs of a cell share it.
pub fn cell_seed(seed: u64, variant: Variant, family: Family, fold: usize) -> u64 {
    seed::derive(seed, &format!("cell/{variant}/{family}/{fold}"))
}

/// SMOTE seed of a (variant, fold) training part, shared by all families.
pub fn smote_seed(seed: u64, variant: Variant, fold: usize) -> u64 {
    seed::derive(seed, &format!("smote/{variant}/{fold}"))
}

/// Report plus bookkeeping on how many cells were trained or reused.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub trained: usize,
    pub reused: usize,
    /// Directory holding one CSV per finished cell.
    pub cell_dir: PathBuf,
}

#[derive(Debug, Clone, Copy)]
struct Job<'a> {
    variant: usize,
    spec: &'a ModelSpec,
    fold: usize,
    smote: bool,
}

fn cell_path(dir: &Path, variant: Variant, family: Family, fold: usize, smote: bool) -> PathBuf {
    let tag = if smote { "smote" } else { "plain" };
    dir.join(format!("{variant}__{family}__{tag}__f{fold}.csv"))
}

/// Writes through a temporary file and a rename, so a crash never leaves a
/// truncated file behind.
pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn cached(path: &Path, expect: &CellResult) -> Option<CellResult> {
    let text = std::fs::read_to_string(path).ok()?;
    let cells = parse_cell_csv(&text).ok()?;
    match cells.as_slice() {
        [c] if c.variant == expect.variant
            && c.family == expect.family
            && c.fold == expect.fold
            && c.smote == expect.smote
            && c.seed == expect.seed =>
        {
            Some(*c)
        }
        _ => None,
    }
}

/// Runs the experiment on all cores (or `jobs` threads).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let exec = Execution::Parallel;
    exec.with_jobs(cfg.jobs, || run_experiment_with(cfg, exec)).map(|o| o.report)
}

/// Ingest, derive variants, measure density, cross-validate the grid and
/// compute statistics. Finished cells are persisted under
/// `out_dir/cells/<config hash>/` and reused on the next run.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    cfg.validate()?;
    let specs = cfg.specs()?;
    let hash = cfg.hash()?;

    let corpus = corpus::load_corpus(&cfg.samples, &cfg.annotations).map_err(|e| e.in_stage("ingest"))?;
    let labels = corpus::labels(&corpus);
    let stats = corpus_stats(&corpus).map_err(|e| e.in_stage("ingest"))?;

    let opts = DeriveOptions { fold_case: cfg.fold_case };
    let derived: Vec<Vec<FeatureSequence>> = cfg
        .variants
        .iter()
        .map(|&v| derive_corpus(&corpus, v, opts, exec))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("variants"))?;
    drop(corpus);

    let mut density = cfg
        .variants
        .iter()
        .zip(&derived)
        .map(|(&v, seqs)| feature_density(v, seqs))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("density"))?;
    sort_by_fd(&mut density);

    let plan = evaluate::stratified_folds(&labels, cfg.folds, cfg.seed).map_err(|e| e.in_stage("grid"))?;
    let cell_dir = cfg.out_dir.join("cells").join(&hash);
    std::fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e).in_stage("grid"))?;

    let mut jobs = Vec::new();
    for variant in 0..cfg.variants.len() {
        for spec in &specs {
            for smote in cfg.smote.passes(spec.family()) {
                for fold in 0..cfg.folds {
                    jobs.push(Job { variant, spec, fold, smote });
                }
            }
        }
    }
    let ctx = Grid {
        cfg,
        derived: &derived,
        labels: &labels,
        plan: &plan,
        dir: &cell_dir,
    };
    let results = exec.map(&jobs, |job| ctx.run(job));
    let mut cells = Vec::with_capacity(results.len());
    let (mut trained, mut reused) = (0, 0);
    for r in results {
        let (cell, fresh) = r.map_err(|e| e.in_stage("grid"))?;
        if fresh {
            trained += 1;
        } else {
            reused += 1;
        }
        cells.push(cell);
    }

    let grid = mean_grid(&cells).map_err(|e| e.in_stage("stats"))?;
    let provenance = Provenance {
        seed: cfg.seed,
        config_hash: hash,
        version: ARTIFACT_VERSION.to_string(),
        folds: cfg.folds,
        n_samples: labels.len(),
        smote: cfg.smote,
        variants: cfg.variants.clone(),
        families: specs.iter().map(ModelSpec::family).collect(),
    };
    let report = report::assemble(provenance, stats, density, cells, grid);
    Ok(RunOutcome {
        report,
        trained,
        reused,
        cell_dir,
    })
}

struct Grid<'a> {
    cfg: &'a ExperimentConfig,
    derived: &'a [Vec<FeatureSequence>],
    labels: &'a [u8],
    plan: &'a FoldPlan,
    dir: &'a Path,
}

impl Grid<'_> {
    /// Returns the cell and whether it was trained in this run.
    fn run(&self, job: &Job<'_>) -> Result<(CellResult, bool)> {
        let variant = self.cfg.variants[job.variant];
        let family = job.spec.family();
        let seed = cell_seed(self.cfg.seed, variant, family, job.fold);
        let mut cell = CellResult {
            variant,
            family,
            fold: job.fold,
            metrics: Metrics {
                acc: 0.0,
                prec: 0.0,
                rec: 0.0,
                f1: 0.0,
                auc: 0.0,
            },
            smote: job.smote,
            seed,
        };
        let path = cell_path(self.dir, variant, family, job.fold, job.smote);
        if let Some(done) = cached(&path, &cell) {
            return Ok((done, false));
        }
        let opts = CvOptions {
            class_weighting: self.cfg.class_weighting,
            smote: job.smote.then(|| SmoteConfig {
                k_neighbors: self.cfg.smote_k,
                target: None,
                seed: smote_seed(self.cfg.seed, variant, job.fold),
            }),
            tfidf: TfidfOptions {
                l2_normalize: self.cfg.l2_normalize,
            },
            min_df: self.cfg.min_df,
            exec: Execution::Sequential,
        };
        cell.metrics = evaluate::evaluate_fold(
            job.spec,
            &self.derived[job.variant],
            self.labels,
            self.plan,
            job.fold,
            &opts,
            seed,
        )
        .map_err(|e| Error::Cell {
            cell: format!("{variant}/{family}/fold {}", job.fold),
            source: Box::new(e),
        })?;
        write_atomic(&path, &write_cell_csv(&[cell]))?;
        Ok((cell, true))
    }
}

/// Unweighted fold means per (variant, family, SMOTE), in first-seen order.
pub(crate) fn mean_grid(cells: &[CellResult]) -> Result<Vec<GridCell>> {
    let mut keys: Vec<(Variant, Family, bool)> = Vec::new();
    for c in cells {
        let k = (c.variant, c.family, c.smote);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(variant, family, smote)| {
            let folds: Vec<Metrics> = cells
                .iter()
                .filter(|c| c.variant == variant && c.family == family && c.smote == smote)
                .map(|c| c.metrics)
                .collect();
            Ok(GridCell {
                variant,
                family,
                smote,
                metrics: Metrics::mean(&folds)?,
            })
        })
        .collect()
}
