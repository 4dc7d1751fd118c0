//! Vocabulary fitting, TF-IDF weighting and index-sequence encoding.
//!
//! `weight(d, t) = tf(t, d) * ln(|D| / n_t)` with raw term counts, natural
//! log, no smoothing. Terms present in every training document therefore get
//! weight zero and are not stored.

mod cache;
mod sparse;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use cache::{read_matrix_cache, write_matrix_cache};
pub use sparse::{SparseMatrix, SparseRow};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::variants::FeatureSequence;

pub const PAD_ID: u32 = 0;
pub const UNKNOWN_ID: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    n_documents: usize,
    features: Vec<String>,
    doc_freq: Vec<usize>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_parts(n_documents: usize, features: Vec<String>, doc_freq: Vec<usize>) -> Self {
        let index = features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.clone(), i as u32))
            .collect();
        Vocabulary {
            n_documents,
            features,
            doc_freq,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn index_of(&self, feature: &str) -> Option<usize> {
        self.index.get(feature).map(|&i| i as usize)
    }

    pub fn feature(&self, index: usize) -> &str {
        &self.features[index]
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        (self.n_documents as f64 / self.doc_freq[index] as f64).ln()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vocabulary = serde_json::from_str(text)?;
        if raw.features.len() != raw.doc_freq.len() || raw.features.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Serde("vocabulary features must be sorted and match doc_freq".into()));
        }
        Ok(Vocabulary::from_parts(raw.n_documents, raw.features, raw.doc_freq))
    }
}

/// Fits a vocabulary on training sequences. Indices follow lexicographic
/// feature order.
pub fn build_vocab(train: &[FeatureSequence], min_df: usize) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::Empty("training sequences"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen: Vec<&str> = Vec::new();
    for seq in train {
        seen.clear();
        seen.extend(seq.features.iter().map(String::as_str));
        seen.sort_unstable();
        seen.dedup();
        for f in &seen {
            *df.entry(f).or_default() += 1;
        }
    }
    let min_df = min_df.max(1);
    let (features, doc_freq) = df
        .into_iter()
        .filter(|(_, n)| *n >= min_df)
        .map(|(f, n)| (f.to_string(), n))
        .unzip();
    Ok(Vocabulary::from_parts(train.len(), features, doc_freq))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfOptions {
    pub l2_normalize: bool,
}

pub fn term_counts(seq: &FeatureSequence, vocab: &Vocabulary) -> Vec<(usize, usize)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for f in &seq.features {
        if let Some(j) = vocab.index_of(f) {
            *counts.entry(j).or_default() += 1;
        }
    }
    counts.into_iter().collect()
}

pub fn tfidf(seqs: &[FeatureSequence], vocab: &Vocabulary) -> SparseMatrix {
    tfidf_with(seqs, vocab, TfidfOptions::default(), Execution::Sequential)
}

pub fn tfidf_with(
    seqs: &[FeatureSequence],
    vocab: &Vocabulary,
    opts: TfidfOptions,
    exec: Execution,
) -> SparseMatrix {
    let rows = exec.map(seqs, |s| {
        term_counts(s, vocab)
            .into_iter()
            .map(|(j, tf)| (j, tf as f64 * vocab.idf(j)))
            .collect::<Vec<_>>()
    });
    let mut m = SparseMatrix::new(vocab.len());
    for r in rows {
        m.push_row(r).expect("vocabulary indices are sorted and in range");
    }
    if opts.l2_normalize {
        m.l2_normalize_rows();
    }
    m
}

/// Raw term-count matrix (tf only); used where a classifier wants counts.
pub fn count_matrix(seqs: &[FeatureSequence], vocab: &Vocabulary) -> SparseMatrix {
    let mut m = SparseMatrix::new(vocab.len());
    for s in seqs {
        m.push_row(term_counts(s, vocab).into_iter().map(|(j, c)| (j, c as f64)))
            .expect("vocabulary indices are sorted and in range");
    }
    m
}

/// Fixed-length id sequence: vocabulary index + 2, 1 for unknown, 0 padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSequence(pub Vec<u32>);

impl IndexSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }
}

pub fn encode_indices(seq: &FeatureSequence, vocab: &Vocabulary, max_len: usize) -> Result<IndexSequence> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be >= 1".into()));
    }
    let mut ids: Vec<u32> = seq
        .features
        .iter()
        .take(max_len)
        .map(|f| vocab.index_of(f).map_or(UNKNOWN_ID, |j| j as u32 + 2))
        .collect();
    ids.resize(max_len, PAD_ID);
    Ok(IndexSequence(ids))
}

pub fn encode_all(seqs: &[FeatureSequence], vocab: &Vocabulary, max_len: usize) -> Result<Vec<IndexSequence>> {
    seqs.iter().map(|s| encode_indices(s, vocab, max_len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variants::VariantId;

    fn seq(fs: &[&str]) -> FeatureSequence {
        FeatureSequence::from_features(VariantId::Tok, fs.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn vocab_basic_and_min_df() {
        let docs = [seq(&["a", "b"]), seq(&["b"])];
        let v = build_vocab(&docs, 1).unwrap();
        assert_eq!(v.features(), ["a", "b"]);
        assert_eq!((v.doc_freq(0), v.doc_freq(1), v.n_documents()), (1, 2, 2));
        let v = build_vocab(&docs, 2).unwrap();
        assert_eq!(v.features(), ["b"]);
        assert_eq!(v.index_of("b"), Some(0));
        assert!(build_vocab(&[], 1).is_err());
    }

    #[test]
    fn tfidf_weights() {
        let docs = [seq(&["x", "x", "common"]), seq(&["common"]), seq(&["common", "y"]), seq(&["common"])];
        let v = build_vocab(&docs, 1).unwrap();
        let m = tfidf(&docs, &v);
        let x = v.index_of("x").unwrap();
        let row = m.row(0);
        assert_eq!(row.indices, &[x as u32]);
        assert!((row.values[0] - 2.0 * 4f64.ln()).abs() < 1e-12);
        assert!((row.values[0] - 2.772588722239781).abs() < 1e-12);
        // term in every document has idf 0 and is not stored
        assert_eq!(m.row(1).nnz(), 0);
    }

    #[test]
    fn tfidf_drops_unseen_and_normalizes() {
        let train = [seq(&["a", "b"]), seq(&["b", "c"])];
        let v = build_vocab(&train, 1).unwrap();
        let m = tfidf_with(&[seq(&["a", "zzz", "c"])], &v, TfidfOptions { l2_normalize: true }, Execution::Sequential);
        assert_eq!(m.row(0).nnz(), 2);
        assert!((m.row(0).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_pads_unknowns_and_truncates() {
        let v = build_vocab(&[seq(&["a", "b"])], 1).unwrap();
        assert_eq!(encode_indices(&seq(&["a", "b"]), &v, 4).unwrap().0, vec![2, 3, 0, 0]);
        assert_eq!(encode_indices(&seq(&["q", "a"]), &v, 3).unwrap().0, vec![1, 2, 0]);
        assert_eq!(encode_indices(&seq(&["a", "b", "a"]), &v, 2).unwrap().0, vec![2, 3]);
        assert!(encode_indices(&seq(&["a"]), &v, 0).is_err());
    }

    #[test]
    fn vocab_json_roundtrip() {
        let v = build_vocab(&[seq(&["a", "b"]), seq(&["b"])], 1).unwrap();
        let back = Vocabulary::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("b"), Some(1));
    }
}
