//! Experiment configuration, the grid runner and report rendering.

mod report;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learn::{Family, ModelSpec};
use crate::variants::{Variant, VariantId};

pub use report::{
    analyze, parse_report_csv, rank_families, read_report_csv, render_markdown, render_report, report_csv_files, winners, Analysis, CorrelationRow,
    ExperimentReport, GridCell, Pairing, Provenance, TTestRow,
};
pub use run::{
    cell_seed, parse_cell_csv, run_experiment, run_experiment_with, smote_seed, write_cell_csv, CellResult,
    RunOutcome, CELL_HEADER,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Which grids run. SMOTE never applies to MLP/CNN families; under `On`
/// they are evaluated without it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoteMode {
    On,
    Off,
    #[default]
    Both,
}

impl SmoteMode {
    /// SMOTE flags evaluated for `family`, plain first.
    pub fn passes(self, family: Family) -> Vec<bool> {
        match (self, family.is_neural()) {
            (SmoteMode::Off, _) | (_, true) => vec![false],
            (SmoteMode::On, false) => vec![true],
            (SmoteMode::Both, false) => vec![false, true],
        }
    }
}

impl FromStr for SmoteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" => Ok(SmoteMode::On),
            "off" => Ok(SmoteMode::Off),
            "both" => Ok(SmoteMode::Both),
            _ => Err(Error::Config(format!("smote must be on, off or both, got {s:?}"))),
        }
    }
}

impl fmt::Display for SmoteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmoteMode::On => "on",
            SmoteMode::Off => "off",
            SmoteMode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
    #[default]
    Both,
}

impl ReportFormat {
    pub fn csv(self) -> bool {
        self != ReportFormat::Markdown
    }

    pub fn markdown(self) -> bool {
        self != ReportFormat::Csv
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "both" => Ok(ReportFormat::Both),
            _ => Err(Error::Config(format!("format must be csv, markdown or both, got {s:?}"))),
        }
    }
}

/// A classifier entry: a bare family name or a family with parameter
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassifierEntry {
    Name(Family),
    Custom {
        family: Family,
        #[serde(default)]
        params: serde_json::Value,
    },
}

impl ClassifierEntry {
    pub fn family(&self) -> Family {
        match self {
            ClassifierEntry::Name(f) | ClassifierEntry::Custom { family: f, .. } => *f,
        }
    }

    pub fn resolve(&self) -> Result<ModelSpec> {
        match self {
            ClassifierEntry::Name(f) => Ok(ModelSpec::default_for(*f)),
            ClassifierEntry::Custom { family, params } => ModelSpec::with_overrides(*family, params),
        }
    }
}

/// Column order of the metric tables when no variant list is given.
pub const DEFAULT_VARIANTS: [VariantId; 11] = [
    VariantId::Tok,
    VariantId::Lem,
    VariantId::LemNer,
    VariantId::Pos,
    VariantId::TokNer,
    VariantId::TokPos,
    VariantId::LemPos,
    VariantId::Chnk,
    VariantId::ChnkNer,
    VariantId::Dep,
    VariantId::DepNer,
];

fn default_variants() -> Vec<Variant> {
    DEFAULT_VARIANTS.into_iter().map(Variant::new).collect()
}

fn default_classifiers() -> Vec<ClassifierEntry> {
    Family::ALL.into_iter().map(ClassifierEntry::Name).collect()
}

fn default_folds() -> usize {
    5
}

fn default_smote_k() -> usize {
    5
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

fn default_min_df() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub samples: PathBuf,
    pub annotations: PathBuf,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierEntry>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub smote: SmoteMode,
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub formats: ReportFormat,
    #[serde(default = "default_true")]
    pub class_weighting: bool,
    #[serde(default)]
    pub l2_normalize: bool,
    #[serde(default)]
    pub fold_case: bool,
    #[serde(default = "default_min_df")]
    pub min_df: usize,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the corpus paths.
    pub fn new(samples: impl Into<PathBuf>, annotations: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            samples: samples.into(),
            annotations: annotations.into(),
            variants: default_variants(),
            classifiers: default_classifiers(),
            folds: default_folds(),
            seed: 0,
            smote: SmoteMode::default(),
            smote_k: default_smote_k(),
            out_dir: default_out_dir(),
            formats: ReportFormat::default(),
            class_weighting: true,
            l2_normalize: false,
            fold_case: false,
            min_df: 1,
            jobs: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Parses a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.samples, &mut cfg.annotations, &mut cfg.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn specs(&self) -> Result<Vec<ModelSpec>> {
        self.classifiers.iter().map(ClassifierEntry::resolve).collect()
    }

    pub fn families(&self) -> Vec<Family> {
        self.classifiers.iter().map(ClassifierEntry::family).collect()
    }

    /// Checks everything that can be checked before loading data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.variants.is_empty() {
            return bad("no variants listed".into());
        }
        if self.classifiers.is_empty() {
            return bad("no classifiers listed".into());
        }
        if let Some(v) = first_duplicate(&self.variants) {
            return bad(format!("variant {v} listed twice"));
        }
        if let Some(f) = first_duplicate(&self.families()) {
            return bad(format!("classifier {f} listed twice"));
        }
        if self.smote_k == 0 {
            return bad("smote_k must be positive".into());
        }
        if self.min_df == 0 {
            return bad("min_df must be positive".into());
        }
        self.specs()?;
        for (what, p) in [("samples", &self.samples), ("annotations", &self.annotations)] {
            if !p.is_file() {
                return bad(format!("{what} file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    /// SHA-256 over the fields that change results: corpus file contents,
    /// variants, resolved hyperparameters, folds, seed, SMOTE settings and
    /// vectoriser options. Paths, output location, formats and job count
    /// are excluded.
    pub fn hash(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Canonical<'a> {
            version: &'a str,
            samples: String,
            annotations: String,
            variants: &'a [Variant],
            classifiers: Vec<ModelSpec>,
            folds: usize,
            seed: u64,
            smote: SmoteMode,
            smote_k: Option<usize>,
            class_weighting: bool,
            l2_normalize: bool,
            fold_case: bool,
            min_df: usize,
        }
        let digest = |p: &Path| -> Result<String> {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(hex(&Sha256::digest(&bytes)))
        };
        let canon = Canonical {
            version: ARTIFACT_VERSION,
            samples: digest(&self.samples)?,
            annotations: digest(&self.annotations)?,
            variants: &self.variants,
            classifiers: self.specs()?,
            folds: self.folds,
            seed: self.seed,
            smote: self.smote,
            smote_k: (self.smote != SmoteMode::Off).then_some(self.smote_k),
            class_weighting: self.class_weighting,
            l2_normalize: self.l2_normalize,
            fold_case: self.fold_case,
            min_df: self.min_df,
        };
        Ok(hex(&Sha256::digest(serde_json::to_vec(&canon)?)))
    }
}

fn first_duplicate<T: PartialEq + Copy>(items: &[T]) -> Option<T> {
    items
        .iter()
        .enumerate()
        .find(|(i, x)| items[..*i].contains(x))
        .map(|(_, x)| *x)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
