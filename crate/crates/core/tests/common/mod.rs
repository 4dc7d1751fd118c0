#![allow(dead_code)]

pub mod fixtures;

use fdlab::learn::{CnnParams, ModelSpec};
use fdlab::seed;
use fdlab::variants::{FeatureSequence, VariantId};
use fdlab::vectorize::{IndexSequence, SparseMatrix};
use rand::Rng;

pub fn seq(features: &[&str]) -> FeatureSequence {
    FeatureSequence::from_features(VariantId::Tok, features.iter().map(|s| s.to_string()).collect())
}

/// Documents built only from class-specific marker words: each class has
/// its own six markers and a document draws 2-5 of them (with repeats).
/// `pos_every` controls the class ratio: every `pos_every`-th sample is
/// positive.
pub fn separable_corpus(n: usize, pos_every: usize, seed_: u64) -> (Vec<FeatureSequence>, Vec<u8>) {
    let mut rng = seed::rng(seed_, "separable-corpus");
    let mut seqs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = u8::from(i % pos_every == 0);
        let prefix = if y == 1 { "bad" } else { "ok" };
        let len = rng.random_range(2..=5);
        let words: Vec<String> = (0..len).map(|_| format!("{prefix}{}", rng.random_range(0..6))).collect();
        seqs.push(FeatureSequence::from_features(VariantId::Tok, words));
        labels.push(y);
    }
    (seqs, labels)
}

/// Two Gaussian-free 2D clusters split by `x0 + x1 = 1`, margin 0.2.
pub fn separable_points(n: usize, seed_: u64) -> (SparseMatrix, Vec<u8>) {
    let mut rng = seed::rng(seed_, "separable-points");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let p = [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)];
        let s: f64 = p[0] + p[1] - 1.0;
        if s.abs() < 0.2 {
            continue;
        }
        let y = u8::from(s > 0.0);
        if rows.len() < 2 && y != rows.len() as u8 {
            continue;
        }
        rows.push(p.to_vec());
        labels.push(y);
    }
    (SparseMatrix::from_dense(2, &rows).unwrap(), labels)
}

/// Random sparse rows in `[0, 1)` with about `density` of entries set.
pub fn random_sparse(n: usize, cols: usize, density: f64, seed_: u64) -> SparseMatrix {
    let mut rng = seed::rng(seed_, "random-sparse");
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random::<f64>() < density { rng.random::<f64>() } else { 0.0 })
                .collect()
        })
        .collect();
    SparseMatrix::from_dense(cols, &rows).unwrap()
}

pub fn random_labels(n: usize, seed_: u64) -> Vec<u8> {
    let mut rng = seed::rng(seed_, "random-labels");
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    y[0] = 0;
    y[1] = 1;
    y
}

/// Sequences where positives contain id 2 or 3 and negatives 4 or 5 among
/// filler ids 6..n_ids, right-padded to `max_len`.
pub fn id_sequences(n: usize, max_len: usize, n_ids: usize, seed_: u64) -> (Vec<IndexSequence>, Vec<u8>) {
    let mut rng = seed::rng(seed_, "id-sequences");
    let mut seqs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let len = rng.random_range(3..=max_len);
        let mut ids: Vec<u32> = (0..len).map(|_| rng.random_range(6..n_ids as u32)).collect();
        let marker = if y == 1 { rng.random_range(2..4) } else { rng.random_range(4..6) };
        let at = rng.random_range(0..len);
        ids[at] = marker;
        ids.resize(max_len, 0);
        seqs.push(IndexSequence(ids));
        labels.push(y);
    }
    (seqs, labels)
}

pub fn tiny_cnn(max_len: usize, embed_dim: usize) -> CnnParams {
    CnnParams {
        max_len,
        embed_dim,
        feature_maps: 4,
        dense_units: 8,
        ..CnnParams::default()
    }
}

pub fn cnn_spec(layers: usize, p: CnnParams) -> ModelSpec {
    if layers == 1 {
        ModelSpec::CNN1L(p)
    } else {
        ModelSpec::CNN2L(p)
    }
}

pub fn toy_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

/// A small, fast config over the bundled toy corpus.
pub fn toy_config(out: &std::path::Path) -> fdlab::experiment::ExperimentConfig {
    use fdlab::experiment::{ClassifierEntry, ExperimentConfig};
    use fdlab::learn::Family;
    let dir = toy_dir();
    let mut cfg = ExperimentConfig::new(dir.join("samples.csv"), dir.join("annotations.conllu"));
    cfg.variants = ["TOK", "POS", "DEP_NER"].iter().map(|v| v.parse().unwrap()).collect();
    cfg.classifiers = vec![ClassifierEntry::Name(Family::Nb), ClassifierEntry::Name(Family::Lr)];
    cfg.seed = 11;
    cfg.out_dir = out.to_path_buf();
    cfg
}
