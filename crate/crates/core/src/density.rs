//! Feature Density: distinct unigram features over all unigram features.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedSample;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::variants::{derive_corpus, DeriveOptions, FeatureSequence, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub variant: Variant,
    pub unique: usize,
    pub all: usize,
    pub fd: f64,
}

impl DensityReport {
    /// FD rounded half away from zero to `dp` decimals, as printed in tables.
    pub fn fd_rounded(&self, dp: i32) -> f64 {
        round_dp(self.fd, dp)
    }
}

pub fn round_dp(x: f64, dp: i32) -> f64 {
    let scale = 10f64.powi(dp);
    (x * scale).round() / scale
}

/// Mergeable feature multiset counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureCounts {
    counts: HashMap<String, usize>,
    total: usize,
}

impl FeatureCounts {
    pub fn add_sequence(&mut self, seq: &FeatureSequence) {
        for f in &seq.features {
            *self.counts.entry(f.clone()).or_default() += 1;
        }
        self.total += seq.features.len();
    }

    pub fn merge(mut self, other: FeatureCounts) -> FeatureCounts {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self), other)
        } else {
            (other, self)
        };
        for (k, v) in small.counts {
            *big.counts.entry(k).or_default() += v;
        }
        big.total += small.total;
        big
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn count(&self, feature: &str) -> usize {
        self.counts.get(feature).copied().unwrap_or(0)
    }
}

const SHARD: usize = 512;

pub fn count_features(seqs: &[FeatureSequence], exec: Execution) -> FeatureCounts {
    let shards: Vec<&[FeatureSequence]> = seqs.chunks(SHARD).collect();
    exec.map(&shards, |shard| {
        let mut c = FeatureCounts::default();
        shard.iter().for_each(|s| c.add_sequence(s));
        c
    })
    .into_iter()
    .fold(FeatureCounts::default(), FeatureCounts::merge)
}

pub fn feature_density(variant: impl Into<Variant>, seqs: &[FeatureSequence]) -> Result<DensityReport> {
    let counts = count_features(seqs, Execution::Sequential);
    density_from_counts(variant.into(), counts.unique(), counts.total())
}

pub fn density_from_counts(variant: Variant, unique: usize, all: usize) -> Result<DensityReport> {
    if all == 0 {
        return Err(Error::Empty("all feature sequences are empty"));
    }
    if unique == 0 || unique > all {
        return Err(Error::InvalidArgument(format!("unique count {unique} must be in 1..={all}")));
    }
    Ok(DensityReport {
        variant,
        unique,
        all,
        fd: unique as f64 / all as f64,
    })
}

/// Sorts reports by FD descending; ties keep variant order.
pub fn sort_by_fd(reports: &mut [DensityReport]) {
    reports.sort_by(|a, b| b.fd.total_cmp(&a.fd).then(a.variant.cmp(&b.variant)));
}

pub fn density_table(
    corpus: &[AnnotatedSample],
    variants: &[Variant],
    opts: DeriveOptions,
    exec: Execution,
) -> Result<Vec<DensityReport>> {
    if variants.is_empty() {
        return Err(Error::Empty("variant list"));
    }
    let mut reports = variants
        .iter()
        .map(|&v| {
            let seqs = derive_corpus(corpus, v, opts, exec)?;
            let c = count_features(&seqs, exec);
            density_from_counts(v, c.unique(), c.total())
        })
        .collect::<Result<Vec<_>>>()?;
    sort_by_fd(&mut reports);
    Ok(reports)
}

pub fn write_density_csv(reports: &[DensityReport]) -> String {
    let mut out = String::from("variant,unique,all,fd\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{}\n", r.variant, r.unique, r.all, r.fd));
    }
    out
}

pub fn parse_density_csv(text: &str) -> Result<Vec<DensityReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let bad = |msg: String| Error::MalformedRow { row: i + 2, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad("expected variant,unique,all,fd".into()));
        }
        let variant: Variant = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let unique = rec[1].parse().map_err(|_| bad(format!("bad unique {:?}", &rec[1])))?;
        let all = rec[2].parse().map_err(|_| bad(format!("bad all {:?}", &rec[2])))?;
        let fd = rec[3].parse().map_err(|_| bad(format!("bad fd {:?}", &rec[3])))?;
        out.push(DensityReport { variant, unique, all, fd });
    }
    Ok(out)
}
