use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{on_off, parse_cell_csv, parse_on_off, write_atomic, write_cell_csv, CellResult};
use super::{ReportFormat, SmoteMode};
use crate::corpus::CorpusStats;
use crate::density::{parse_density_csv, write_density_csv, DensityReport};
use crate::error::{Error, Result};
use crate::evaluate::{pearson, t_test, Correlation, Metrics, TTest, TTestMode};
use crate::learn::Family;
use crate::variants::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub folds: usize,
    pub n_samples: usize,
    pub smote: SmoteMode,
    /// Column order of the metric tables.
    pub variants: Vec<Variant>,
    /// Row order of the metric tables.
    pub families: Vec<Family>,
}

/// Fold-mean metrics of one (variant, family, SMOTE) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub variant: Variant,
    pub family: Family,
    pub smote: bool,
    pub metrics: Metrics,
}

/// Which F1 values a statistic is computed on. `Plain` is the grid without
/// SMOTE; `Normalized` takes SMOTE results for non-neural families and plain
/// results for MLP/CNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Plain,
    Normalized,
}

impl Pairing {
    pub const ALL: [Pairing; 2] = [Pairing::Plain, Pairing::Normalized];

    fn uses_smote(self, family: Family) -> bool {
        self == Pairing::Normalized && !family.is_neural()
    }

    fn parse(s: &str) -> Option<Pairing> {
        match s {
            "plain" => Some(Pairing::Plain),
            "normalized" => Some(Pairing::Normalized),
            _ => None,
        }
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Plain => "plain",
            Pairing::Normalized => "normalized",
        })
    }
}

/// Pearson correlation of FD with a family's F1 across variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub family: Family,
    pub pairing: Pairing,
    pub correlation: Option<Correlation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub a: Family,
    pub b: Family,
    pub pairing: Pairing,
    pub mode: TTestMode,
    pub result: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Analysis {
    pub correlations: Vec<CorrelationRow>,
    pub t_tests: Vec<TTestRow>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub corpus: CorpusStats,
    /// Sorted by FD, descending.
    pub density: Vec<DensityReport>,
    /// Every persisted per-fold row behind `grid`.
    pub folds: Vec<CellResult>,
    pub grid: Vec<GridCell>,
    pub correlations: Vec<CorrelationRow>,
    pub t_tests: Vec<TTestRow>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn cell(&self, variant: Variant, family: Family, smote: bool) -> Option<&GridCell> {
        self.grid
            .iter()
            .find(|c| c.variant == variant && c.family == family && c.smote == smote)
    }

    /// The cell a pairing reads for `family` on `variant`.
    pub fn paired_cell(&self, variant: Variant, family: Family, pairing: Pairing) -> Option<&GridCell> {
        self.cell(variant, family, pairing.uses_smote(family))
    }
}

pub(crate) fn assemble(
    provenance: Provenance,
    corpus: CorpusStats,
    density: Vec<DensityReport>,
    folds: Vec<CellResult>,
    grid: Vec<GridCell>,
) -> ExperimentReport {
    let analysis = analyze(&provenance, &density, &grid);
    ExperimentReport {
        provenance,
        corpus,
        density,
        folds,
        grid,
        correlations: analysis.correlations,
        t_tests: analysis.t_tests,
        notes: analysis.notes,
    }
}

fn find(grid: &[GridCell], variant: Variant, family: Family, smote: bool) -> Option<&GridCell> {
    grid.iter()
        .find(|c| c.variant == variant && c.family == family && c.smote == smote)
}

fn metric_vector(
    grid: &[GridCell],
    variants: &[Variant],
    family: Family,
    pairing: Pairing,
    metric: fn(&Metrics) -> f64,
) -> Option<Vec<f64>> {
    variants
        .iter()
        .map(|&v| find(grid, v, family, pairing.uses_smote(family)).map(|c| metric(&c.metrics)))
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Families ordered by mean F1 over variants (plain results when present,
/// else normalized), ties by mean AUC, then name.
pub fn rank_families(grid: &[GridCell], variants: &[Variant], families: &[Family]) -> Vec<Family> {
    let mut scored: Vec<(Family, f64, f64)> = families
        .iter()
        .filter_map(|&f| {
            Pairing::ALL.iter().find_map(|&p| {
                let f1 = metric_vector(grid, variants, f, p, |m| m.f1)?;
                let auc = metric_vector(grid, variants, f, p, |m| m.auc)?;
                Some((f, mean(&f1), mean(&auc)))
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(b.2.total_cmp(&a.2))
            .then(a.0.name().cmp(b.0.name()))
    });
    scored.into_iter().map(|s| s.0).collect()
}

/// FD correlations for every family and pairing, and t-tests among the top
/// three families. Statistics that cannot be computed are left empty with a
/// note.
pub fn analyze(provenance: &Provenance, density: &[DensityReport], grid: &[GridCell]) -> Analysis {
    let variants = &provenance.variants;
    let mut out = Analysis::default();
    let fd: Option<Vec<f64>> = variants
        .iter()
        .map(|v| density.iter().find(|d| d.variant == *v).map(|d| d.fd))
        .collect();
    if fd.is_none() {
        out.notes.push("density table does not cover every variant".into());
    }
    for &family in &provenance.families {
        for pairing in Pairing::ALL {
            let f1 = metric_vector(grid, variants, family, pairing, |m| m.f1);
            let correlation = match (&fd, f1) {
                (Some(x), Some(y)) => match pearson(x, &y) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        out.notes.push(format!("{family} {pairing} correlation: {e}"));
                        None
                    }
                },
                (_, None) => {
                    out.notes.push(format!("{family} {pairing} correlation: missing F1 results"));
                    None
                }
                (None, _) => None,
            };
            out.correlations.push(CorrelationRow {
                family,
                pairing,
                correlation,
            });
        }
    }
    let top: Vec<Family> = rank_families(grid, variants, &provenance.families)
        .into_iter()
        .take(3)
        .collect();
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            let (a, b) = (top[i], top[j]);
            for pairing in Pairing::ALL {
                let fa = metric_vector(grid, variants, a, pairing, |m| m.f1);
                let fb = metric_vector(grid, variants, b, pairing, |m| m.f1);
                for mode in [TTestMode::Paired, TTestMode::TwoSample] {
                    let result = match (&fa, &fb) {
                        (Some(x), Some(y)) => match t_test(x, y, mode) {
                            Ok(t) => Some(t),
                            Err(e) => {
                                out.notes.push(format!("{a} vs {b} {pairing} {}: {e}", mode_name(mode)));
                                None
                            }
                        },
                        _ => None,
                    };
                    out.t_tests.push(TTestRow {
                        a,
                        b,
                        pairing,
                        mode,
                        result,
                    });
                }
            }
        }
    }
    out
}

/// Best family per variant under `pairing`: highest F1, then AUC, then name.
pub fn winners(report: &ExperimentReport, pairing: Pairing) -> Vec<(Variant, Option<Family>)> {
    report
        .provenance
        .variants
        .iter()
        .map(|&v| {
            let best = report
                .provenance
                .families
                .iter()
                .filter_map(|&f| report.paired_cell(v, f, pairing))
                .max_by(|a, b| {
                    a.metrics
                        .f1
                        .total_cmp(&b.metrics.f1)
                        .then(a.metrics.auc.total_cmp(&b.metrics.auc))
                        .then(b.family.name().cmp(a.family.name()))
                })
                .map(|c| c.family);
            (v, best)
        })
        .collect()
}

fn mode_name(mode: TTestMode) -> &'static str {
    match mode {
        TTestMode::Paired => "paired",
        TTestMode::TwoSample => "two_sample",
    }
}

fn parse_mode(s: &str) -> Option<TTestMode> {
    match s {
        "paired" => Some(TTestMode::Paired),
        "two_sample" => Some(TTestMode::TwoSample),
        _ => None,
    }
}

// ---------------------------------------------------------------- markdown

const METRICS: [(&str, fn(&Metrics) -> f64); 5] = [
    ("Acc", |m| m.acc),
    ("Prec", |m| m.prec),
    ("Rec", |m| m.rec),
    ("F1", |m| m.f1),
    ("AUC", |m| m.auc),
];

fn row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn header(cols: &[String]) -> String {
    let mut s = row(cols);
    s.push_str(&row(&vec!["---".to_string(); cols.len()]));
    s
}

fn strs<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// A family x variant table of one metric: bold marks the best family in a
/// column, underline the best variant in a row.
fn emphasised(values: &[Vec<Option<f64>>]) -> Vec<Vec<String>> {
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let n_cols = values.first().map_or(0, Vec::len);
    let col_best: Vec<f64> = (0..n_cols)
        .map(|j| max(&mut values.iter().filter_map(|r| r[j])))
        .collect();
    values
        .iter()
        .map(|r| {
            let row_best = max(&mut r.iter().flatten().copied());
            r.iter()
                .enumerate()
                .map(|(j, v)| match v {
                    None => "n/a".to_string(),
                    Some(x) => {
                        let mut s = format!("{x:.3}");
                        if *x == row_best && r.len() > 1 {
                            s = format!("<u>{s}</u>");
                        }
                        if *x == col_best[j] && values.len() > 1 {
                            s = format!("**{s}**");
                        }
                        s
                    }
                })
                .collect()
        })
        .collect()
}

fn variant_header(first: &[&str], variants: &[Variant]) -> String {
    let mut cols: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    cols.extend(variants.iter().map(|v| v.to_string()));
    header(&cols)
}

fn opt(x: Option<f64>, dp: usize) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.dp$}"))
}

pub fn render_markdown(report: &ExperimentReport) -> String {
    let p = &report.provenance;
    let variants = &p.variants;
    let families = &p.families;
    let mut md = String::from("# Feature density experiment\n\n## Provenance\n\n");
    md.push_str(&header(&strs(["Field", "Value"])));
    for (k, v) in [
        ("seed", p.seed.to_string()),
        ("config hash", format!("`{}`", p.config_hash)),
        ("version", p.version.clone()),
        ("folds", p.folds.to_string()),
        ("samples", p.n_samples.to_string()),
        ("smote", p.smote.to_string()),
    ] {
        md.push_str(&row(&[k.to_string(), v]));
    }

    let c = &report.corpus;
    md.push_str("\n## Corpus\n\n");
    md.push_str(&header(&strs(["Statistic", "Value"])));
    for (k, v) in [
        ("samples", c.n_samples.to_string()),
        ("harmful", format!("{} ({:.2}%)", c.n_harmful, 100.0 * c.harmful_fraction())),
        ("non-harmful", c.n_nonharmful.to_string()),
        ("tokens", c.n_tokens.to_string()),
        ("unique tokens", c.n_unique_tokens.to_string()),
        ("post words / chars", format!("{:.1} / {:.1}", c.post.words, c.post.chars)),
        ("question words / chars", format!("{:.1} / {:.1}", c.question.words, c.question.chars)),
        ("answer words / chars", format!("{:.1} / {:.1}", c.answer.words, c.answer.chars)),
        (
            "harmful post words / chars",
            format!("{:.1} / {:.1}", c.harmful_post.words, c.harmful_post.chars),
        ),
        (
            "non-harmful post words / chars",
            format!("{:.1} / {:.1}", c.nonharmful_post.words, c.nonharmful_post.chars),
        ),
    ] {
        md.push_str(&row(&[k.to_string(), v]));
    }

    md.push_str("\n## Feature density\n\n");
    md.push_str(&header(&strs(["Variant", "Unique", "All", "FD"])));
    for d in &report.density {
        md.push_str(&row(&[
            d.variant.to_string(),
            d.unique.to_string(),
            d.all.to_string(),
            format!("{:.4}", d.fd_rounded(4)),
        ]));
    }

    if report.grid.iter().any(|g| !g.smote) {
        md.push_str("\n## Metrics without SMOTE\n\n");
        md.push_str(&variant_header(&["Classifier", "Metric"], variants));
        let shown: Vec<Family> = families
            .iter()
            .copied()
            .filter(|&f| variants.iter().any(|&v| report.cell(v, f, false).is_some()))
            .collect();
        let per_metric: Vec<Vec<Vec<String>>> = METRICS
            .iter()
            .map(|(_, get)| {
                let values: Vec<Vec<Option<f64>>> = shown
                    .iter()
                    .map(|&f| {
                        variants
                            .iter()
                            .map(|&v| report.cell(v, f, false).map(|c| get(&c.metrics)))
                            .collect()
                    })
                    .collect();
                emphasised(&values)
            })
            .collect();
        for (i, f) in shown.iter().enumerate() {
            for (m, (name, _)) in METRICS.iter().enumerate() {
                let mut cells = vec![if m == 0 { f.to_string() } else { String::new() }, name.to_string()];
                cells.extend(per_metric[m][i].iter().cloned());
                md.push_str(&row(&cells));
            }
        }
    }

    let f1_title = match p.smote {
        SmoteMode::Off => "F1 summary",
        _ => "F1 with SMOTE (MLP and CNN without)",
    };
    let f1_pairing = if p.smote == SmoteMode::Off {
        Pairing::Plain
    } else {
        Pairing::Normalized
    };
    md.push_str(&format!("\n## {f1_title}\n\n"));
    md.push_str(&variant_header(&["Classifier"], variants));
    let values: Vec<Vec<Option<f64>>> = families
        .iter()
        .map(|&f| {
            variants
                .iter()
                .map(|&v| report.paired_cell(v, f, f1_pairing).map(|c| c.metrics.f1))
                .collect()
        })
        .collect();
    for (f, cells) in families.iter().zip(emphasised(&values)) {
        let mut r = vec![f.to_string()];
        r.extend(cells);
        md.push_str(&row(&r));
    }

    md.push_str("\n## Correlation of FD with F1\n\n");
    md.push_str(&header(&strs(["Classifier", "Pairing", "rho", "p (2-sided)", "n"])));
    for r in &report.correlations {
        md.push_str(&row(&[
            r.family.to_string(),
            r.pairing.to_string(),
            opt(r.correlation.map(|c| c.rho), 4),
            opt(r.correlation.map(|c| c.p_two_sided), 4),
            r.correlation.map_or_else(|| "n/a".into(), |c| c.n.to_string()),
        ]));
    }

    md.push_str("\n## t-tests between the top three classifiers\n\n");
    md.push_str(&header(&strs(["Pair", "Pairing", "Mode", "t", "df", "p (2-sided)"])));
    for t in &report.t_tests {
        md.push_str(&row(&[
            format!("{} & {}", t.a, t.b),
            t.pairing.to_string(),
            mode_name(t.mode).to_string(),
            opt(t.result.map(|r| r.t), 4),
            opt(t.result.map(|r| r.df), 0),
            opt(t.result.map(|r| r.p_two_sided), 4),
        ]));
    }

    md.push_str("\n## Winners\n\n");
    md.push_str(&header(&strs(["Variant", "Plain", "Normalized"])));
    let plain = winners(report, Pairing::Plain);
    let norm = winners(report, Pairing::Normalized);
    for ((v, a), (_, b)) in plain.iter().zip(&norm) {
        let name = |f: &Option<Family>| f.map_or_else(|| "n/a".to_string(), |f| f.to_string());
        md.push_str(&row(&[v.to_string(), name(a), name(b)]));
    }

    if !report.notes.is_empty() {
        md.push_str("\n## Notes\n\n");
        for n in &report.notes {
            md.push_str(&format!("- {n}\n"));
        }
    }
    md
}

// --------------------------------------------------------------------- csv

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn key_value_csv(value: &serde_json::Value) -> String {
    let mut pairs = Vec::new();
    flatten("", value, &mut pairs);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).expect("in-memory write");
    for (k, v) in pairs {
        w.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn parse_key_value_csv<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut root = serde_json::Map::new();
    for (i, rec) in csv::Reader::from_reader(text.as_bytes()).records().enumerate() {
        let bad = |msg: String| Error::MalformedRow { row: i + 2, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&rec[1]).map_err(|e| bad(e.to_string()))?;
        let mut parts: Vec<&str> = rec[0].split('.').collect();
        let last = parts.pop().ok_or_else(|| bad("empty key".into()))?;
        let mut node = &mut root;
        for p in parts {
            node = node
                .entry(p)
                .or_insert_with(|| serde_json::Value::Object(Default::default()))
                .as_object_mut()
                .ok_or_else(|| bad(format!("key {p:?} is both a value and a group")))?;
        }
        node.insert(last.to_string(), value);
    }
    Ok(serde_json::from_value(serde_json::Value::Object(root))?)
}

fn csv_records(text: &str, header: &str) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let got = rdr
        .headers()
        .map_err(|e| Error::MalformedRow { row: 1, msg: e.to_string() })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if got != header {
        return Err(Error::MalformedRow {
            row: 1,
            msg: format!("expected header {header}, got {got}"),
        });
    }
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::MalformedRow {
                row: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, j: usize, row: usize) -> Result<T> {
    rec[j].parse().map_err(|_| Error::MalformedRow {
        row,
        msg: format!("bad value {:?} in column {}", &rec[j], j + 1),
    })
}

fn opt_field<T: std::str::FromStr>(rec: &csv::StringRecord, j: usize, row: usize) -> Result<Option<T>> {
    if rec[j].is_empty() {
        Ok(None)
    } else {
        field(rec, j, row).map(Some)
    }
}

fn opt_str<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

const GRID_HEADER: &str = "variant,family,smote,acc,prec,rec,f1,auc";
const CORR_HEADER: &str = "family,pairing,rho,p_two_sided,n";
const TTEST_HEADER: &str = "a,b,pairing,mode,t,df,p_two_sided";

/// The CSV files of a report, by file name. Floats are written in their
/// shortest exact form, so [`read_report_csv`] restores identical values.
pub fn report_csv_files(report: &ExperimentReport) -> Result<Vec<(&'static str, String)>> {
    let mut grid = format!("{GRID_HEADER}\n");
    for g in &report.grid {
        let m = &g.metrics;
        grid.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            g.variant,
            g.family,
            on_off(g.smote),
            m.acc,
            m.prec,
            m.rec,
            m.f1,
            m.auc
        ));
    }
    let mut corr = format!("{CORR_HEADER}\n");
    for r in &report.correlations {
        let c = r.correlation;
        corr.push_str(&format!(
            "{},{},{},{},{}\n",
            r.family,
            r.pairing,
            opt_str(c.map(|c| c.rho)),
            opt_str(c.map(|c| c.p_two_sided)),
            opt_str(c.map(|c| c.n))
        ));
    }
    let mut tt = format!("{TTEST_HEADER}\n");
    for t in &report.t_tests {
        let r = t.result;
        tt.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.a,
            t.b,
            t.pairing,
            mode_name(t.mode),
            opt_str(r.map(|r| r.t)),
            opt_str(r.map(|r| r.df)),
            opt_str(r.map(|r| r.p_two_sided))
        ));
    }
    let mut notes = csv::Writer::from_writer(Vec::new());
    notes.write_record(["note"]).expect("in-memory write");
    for n in &report.notes {
        notes.write_record([n]).expect("in-memory write");
    }
    let notes = String::from_utf8(notes.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    Ok(vec![
        ("provenance.csv", key_value_csv(&serde_json::to_value(&report.provenance)?)),
        ("corpus.csv", key_value_csv(&serde_json::to_value(&report.corpus)?)),
        ("density.csv", write_density_csv(&report.density)),
        ("folds.csv", write_cell_csv(&report.folds)),
        ("grid.csv", grid),
        ("correlations.csv", corr),
        ("ttests.csv", tt),
        ("notes.csv", notes),
    ])
}

fn parse_grid(text: &str) -> Result<Vec<GridCell>> {
    csv_records(text, GRID_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 2;
            Ok(GridCell {
                variant: field(r, 0, row)?,
                family: field(r, 1, row)?,
                smote: parse_on_off(&r[2]).ok_or_else(|| Error::MalformedRow {
                    row,
                    msg: format!("bad smote flag {:?}", &r[2]),
                })?,
                metrics: Metrics {
                    acc: field(r, 3, row)?,
                    prec: field(r, 4, row)?,
                    rec: field(r, 5, row)?,
                    f1: field(r, 6, row)?,
                    auc: field(r, 7, row)?,
                },
            })
        })
        .collect()
}

fn bad_pairing(row: usize, s: &str) -> Error {
    Error::MalformedRow {
        row,
        msg: format!("bad pairing {s:?}"),
    }
}

fn parse_correlations(text: &str) -> Result<Vec<CorrelationRow>> {
    csv_records(text, CORR_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 2;
            let rho: Option<f64> = opt_field(r, 2, row)?;
            let p: Option<f64> = opt_field(r, 3, row)?;
            let n: Option<usize> = opt_field(r, 4, row)?;
            Ok(CorrelationRow {
                family: field(r, 0, row)?,
                pairing: Pairing::parse(&r[1]).ok_or_else(|| bad_pairing(row, &r[1]))?,
                correlation: match (rho, p, n) {
                    (Some(rho), Some(p_two_sided), Some(n)) => Some(Correlation { rho, p_two_sided, n }),
                    _ => None,
                },
            })
        })
        .collect()
}

fn parse_ttests(text: &str) -> Result<Vec<TTestRow>> {
    csv_records(text, TTEST_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 2;
            let t: Option<f64> = opt_field(r, 4, row)?;
            let df: Option<f64> = opt_field(r, 5, row)?;
            let p: Option<f64> = opt_field(r, 6, row)?;
            Ok(TTestRow {
                a: field(r, 0, row)?,
                b: field(r, 1, row)?,
                pairing: Pairing::parse(&r[2]).ok_or_else(|| bad_pairing(row, &r[2]))?,
                mode: parse_mode(&r[3]).ok_or_else(|| Error::MalformedRow {
                    row,
                    msg: format!("bad mode {:?}", &r[3]),
                })?,
                result: match (t, df, p) {
                    (Some(t), Some(df), Some(p_two_sided)) => Some(TTest { t, df, p_two_sided }),
                    _ => None,
                },
            })
        })
        .collect()
}

/// Rebuilds a report from the files of [`report_csv_files`].
pub fn parse_report_csv(files: &BTreeMap<String, String>) -> Result<ExperimentReport> {
    let get = |name: &str| {
        files
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::InvalidArgument(format!("report file {name} missing")))
    };
    let in_file = |name: &'static str| move |e: Error| e.in_stage(name);
    Ok(ExperimentReport {
        provenance: parse_key_value_csv(get("provenance.csv")?).map_err(in_file("provenance.csv"))?,
        corpus: parse_key_value_csv(get("corpus.csv")?).map_err(in_file("corpus.csv"))?,
        density: parse_density_csv(get("density.csv")?).map_err(in_file("density.csv"))?,
        folds: parse_cell_csv(get("folds.csv")?).map_err(in_file("folds.csv"))?,
        grid: parse_grid(get("grid.csv")?).map_err(in_file("grid.csv"))?,
        correlations: parse_correlations(get("correlations.csv")?).map_err(in_file("correlations.csv"))?,
        t_tests: parse_ttests(get("ttests.csv")?).map_err(in_file("ttests.csv"))?,
        notes: csv_records(get("notes.csv")?, "note")
            .map_err(in_file("notes.csv"))?
            .iter()
            .map(|r| r[0].to_string())
            .collect(),
    })
}

const CSV_DIR: &str = "csv";
const MARKDOWN_FILE: &str = "report.md";

/// Reads the CSV report written by [`render_report`] into `dir`.
pub fn read_report_csv(dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    let csv_dir = dir.as_ref().join(CSV_DIR);
    let mut files = BTreeMap::new();
    for name in [
        "provenance.csv",
        "corpus.csv",
        "density.csv",
        "folds.csv",
        "grid.csv",
        "correlations.csv",
        "ttests.csv",
        "notes.csv",
    ] {
        let path = csv_dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        files.insert(name.to_string(), text);
    }
    parse_report_csv(&files)
}

/// Writes `report.md` and/or `csv/*.csv` under `dir`; returns the paths.
pub fn render_report(report: &ExperimentReport, format: ReportFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    if format.markdown() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MARKDOWN_FILE);
        write_atomic(&path, &render_markdown(report))?;
        written.push(path);
    }
    if format.csv() {
        let csv_dir = dir.join(CSV_DIR);
        std::fs::create_dir_all(&csv_dir).map_err(|e| Error::io(&csv_dir, e))?;
        for (name, text) in report_csv_files(report)? {
            let path = csv_dir.join(name);
            write_atomic(&path, &text)?;
            written.push(path);
        }
    }
    Ok(written)
}
