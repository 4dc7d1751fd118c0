//! Stratified cross-validation, classification metrics and the correlation
//! statistics.

mod stats;

pub use stats::{inc_beta, ln_gamma, pearson, pearson_p, t_cdf, t_test, t_two_sided_p, Correlation, TTest, TTestMode};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::balance::{self, ClassWeights, SmoteConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::learn::{self, Inputs, ModelSpec, Prediction};
use crate::seed;
use crate::variants::FeatureSequence;
use crate::vectorize::{self, IndexSequence, SparseMatrix, TfidfOptions, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Test indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class separately, then deals its members round-robin over
/// the folds. The deal position carries over from the negative class to the
/// positive one, so fold sizes also differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} samples, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut seed::rng_indexed(seed, "folds", u64::from(class)));
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0/1")));
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    /// Macro averages over the two classes.
    pub prec: f64,
    pub rec: f64,
    pub f1: f64,
    pub auc: f64,
}

impl Metrics {
    /// Unweighted mean.
    pub fn mean(all: &[Metrics]) -> Result<Metrics> {
        if all.is_empty() {
            return Err(Error::Empty("metrics"));
        }
        let n = all.len() as f64;
        let sum = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Ok(Metrics {
            acc: sum(|m| m.acc),
            prec: sum(|m| m.prec),
            rec: sum(|m| m.rec),
            f1: sum(|m| m.f1),
            auc: sum(|m| m.auc),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / (self.tp + self.fp + self.tn + self.fn_) as f64
    }

    /// `(precision, recall, f1)` of one class, each 0 when undefined.
    pub fn class_scores(&self, positive: bool) -> (f64, f64, f64) {
        let (tp, fp, fn_) = if positive {
            (self.tp, self.fp, self.fn_)
        } else {
            (self.tn, self.fn_, self.fp)
        };
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }

    /// Macro `(precision, recall, f1)`.
    pub fn macro_scores(&self) -> (f64, f64, f64) {
        let (p0, r0, f0) = self.class_scores(false);
        let (p1, r1, f1) = self.class_scores(true);
        ((p0 + p1) / 2.0, (r0 + r1) / 2.0, (f0 + f1) / 2.0)
    }
}

fn check_both_classes(labels: &[u8]) -> Result<()> {
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Mann-Whitney AUC with midranks for ties.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    check_both_classes(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        rank_sum_pos += mid * order[start..end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end;
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

pub fn score(predictions: &[Prediction], labels: &[u8]) -> Result<Metrics> {
    let predicted: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    score_parts(&predicted, &scores, labels)
}

pub fn score_parts(predicted: &[u8], scores: &[f64], labels: &[u8]) -> Result<Metrics> {
    let c = Confusion::from_labels(predicted, labels)?;
    let auc = auc(scores, labels)?;
    let (prec, rec, f1) = c.macro_scores();
    Ok(Metrics {
        acc: c.accuracy(),
        prec,
        rec,
        f1,
        auc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Inverse-frequency class weights on the (possibly oversampled)
    /// training labels; unit weights otherwise.
    pub class_weighting: bool,
    pub smote: Option<SmoteConfig>,
    pub tfidf: TfidfOptions,
    pub min_df: usize,
    pub exec: Execution,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            class_weighting: true,
            smote: None,
            tfidf: TfidfOptions::default(),
            min_df: 1,
            exec: Execution::Sequential,
        }
    }
}

/// Owned model input for one side of a fold.
#[derive(Debug, Clone)]
pub enum FoldInputs {
    Sparse(SparseMatrix),
    Indices { seqs: Vec<IndexSequence>, n_ids: usize },
}

impl FoldInputs {
    pub fn as_inputs(&self) -> Inputs<'_> {
        match self {
            FoldInputs::Sparse(m) => Inputs::Sparse(m),
            FoldInputs::Indices { seqs, n_ids } => Inputs::Indices { seqs, n_ids: *n_ids },
        }
    }
}

/// One fold, vectorised with a vocabulary fitted on its training part.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub vocab: Vocabulary,
    pub train: FoldInputs,
    pub train_labels: Vec<u8>,
    pub test: FoldInputs,
    pub test_labels: Vec<u8>,
    /// Synthetic rows appended to the training part.
    pub n_synthetic: usize,
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Builds the train/test inputs of `fold`: vocabulary, then TF-IDF rows (or
/// id sequences when `max_len` is given), then SMOTE on the training rows.
pub fn prepare_fold(
    seqs: &[FeatureSequence],
    labels: &[u8],
    plan: &FoldPlan,
    fold: usize,
    max_len: Option<usize>,
    opts: &CvOptions,
) -> Result<FoldData> {
    if seqs.len() != labels.len() || plan.n_samples() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sequences, {} labels, fold plan over {}",
            seqs.len(),
            labels.len(),
            plan.n_samples()
        )));
    }
    if fold >= plan.k {
        return Err(Error::InvalidArgument(format!("fold {fold} out of {}", plan.k)));
    }
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let train_seqs = pick(seqs, &train_idx);
    let test_seqs = pick(seqs, test_idx);
    let mut train_labels = pick(labels, &train_idx);
    let test_labels = pick(labels, test_idx);
    let vocab = vectorize::build_vocab(&train_seqs, opts.min_df)?;
    let mut n_synthetic = 0;
    let (train, test) = match max_len {
        Some(len) => {
            if opts.smote.is_some() {
                return Err(Error::InvalidArgument("SMOTE applies to TF-IDF rows, not id sequences".into()));
            }
            let n_ids = vocab.len() + 2;
            (
                FoldInputs::Indices {
                    seqs: vectorize::encode_all(&train_seqs, &vocab, len)?,
                    n_ids,
                },
                FoldInputs::Indices {
                    seqs: vectorize::encode_all(&test_seqs, &vocab, len)?,
                    n_ids,
                },
            )
        }
        None => {
            let mut train = vectorize::tfidf_with(&train_seqs, &vocab, opts.tfidf, opts.exec);
            let test = vectorize::tfidf_with(&test_seqs, &vocab, opts.tfidf, opts.exec);
            if let Some(cfg) = &opts.smote {
                let synthetic = oversample(&train, &train_labels, cfg, opts.exec)?;
                n_synthetic = synthetic.n_rows();
                let minority = minority_label(&train_labels);
                train.append(&synthetic)?;
                train_labels.extend(std::iter::repeat_n(minority, n_synthetic));
            }
            (FoldInputs::Sparse(train), FoldInputs::Sparse(test))
        }
    };
    Ok(FoldData {
        vocab,
        train,
        train_labels,
        test,
        test_labels,
        n_synthetic,
    })
}

fn minority_label(labels: &[u8]) -> u8 {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    u8::from(pos * 2 <= labels.len())
}

/// SMOTE rows for the minority class of `x`. The neighbour count is capped
/// at the minority size minus one.
pub fn oversample(x: &SparseMatrix, labels: &[u8], cfg: &SmoteConfig, exec: Execution) -> Result<SparseMatrix> {
    let minority = minority_label(labels);
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority).collect();
    let majority = labels.len() - idx.len();
    let target = cfg.resolve_target(majority);
    let mut out = SparseMatrix::new(x.n_cols());
    if target <= idx.len() {
        return Ok(out);
    }
    if idx.len() < 2 {
        return Err(Error::InvalidArgument("SMOTE needs at least 2 minority rows".into()));
    }
    let dense: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_dense(x.n_cols())).collect();
    let cfg = SmoteConfig {
        k_neighbors: cfg.k_neighbors.min(idx.len() - 1),
        ..*cfg
    };
    for row in balance::smote(&dense, target, &cfg, exec)? {
        out.push_dense_row(&row)?;
    }
    Ok(out)
}

/// Trains on the training part of `fold` and scores its test part.
pub fn evaluate_fold(
    spec: &ModelSpec,
    seqs: &[FeatureSequence],
    labels: &[u8],
    plan: &FoldPlan,
    fold: usize,
    opts: &CvOptions,
    seed: u64,
) -> Result<Metrics> {
    let data = prepare_fold(seqs, labels, plan, fold, spec.max_len(), opts)?;
    let weights = if opts.class_weighting {
        balance::class_weights(&data.train_labels)?
    } else {
        ClassWeights::UNIT
    };
    let train_opts = learn::TrainOptions {
        exec: opts.exec,
        track_loss: false,
    };
    let fitted = learn::train_with(spec, data.train.as_inputs(), &data.train_labels, weights, seed, train_opts)?;
    let preds = learn::predict_with(&fitted.model, data.test.as_inputs(), opts.exec)?;
    score(&preds, &data.test_labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// All folds of `plan`. Fold `f` trains with seed `derive_indexed(seed,
/// "fold-model", f)`; SMOTE draws from `derive_indexed(smote.seed,
/// "fold-smote", f)`.
pub fn cross_validate(
    spec: &ModelSpec,
    seqs: &[FeatureSequence],
    labels: &[u8],
    plan: &FoldPlan,
    opts: &CvOptions,
    seed: u64,
) -> Result<CvResult> {
    let folds = opts.exec.map_range(plan.k, |f| {
        let mut fold_opts = *opts;
        if let Some(s) = &mut fold_opts.smote {
            s.seed = seed::derive_indexed(s.seed, "fold-smote", f as u64);
        }
        evaluate_fold(spec, seqs, labels, plan, f, &fold_opts, seed::derive_indexed(seed, "fold-model", f as u64))
    });
    let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CvResult {
        mean: Metrics::mean(&folds)?,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Family;
    use crate::variants::VariantId;

    #[test]
    fn folds_one_of_each_class() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let plan = stratified_folds(&labels, 5, 3).unwrap();
        for f in &plan.folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().map(|&i| labels[i]).sum::<u8>(), 1);
        }
    }

    #[test]
    fn folds_on_the_published_class_shape() {
        let mut labels = vec![0u8; 11859];
        labels.extend(std::iter::repeat_n(1, 913));
        let plan = stratified_folds(&labels, 5, 42).unwrap();
        for f in &plan.folds {
            let pos = f.iter().filter(|&&i| labels[i] == 1).count();
            assert!(pos == 182 || pos == 183, "{pos}");
        }
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        assert_eq!(plan.train_indices(0).len() + plan.folds[0].len(), labels.len());
    }

    #[test]
    fn folds_reject_small_classes() {
        assert!(stratified_folds(&[0, 0, 0, 1, 1], 3, 0).is_err());
        assert!(stratified_folds(&[0, 1, 0, 1], 1, 0).is_err());
    }

    #[test]
    fn all_negative_predictor_on_published_counts() {
        let mut truth = vec![0u8; 11859];
        truth.extend(std::iter::repeat_n(1, 913));
        let predicted = vec![0u8; truth.len()];
        let c = Confusion::from_labels(&predicted, &truth).unwrap();
        let (p, r, f) = c.macro_scores();
        assert!((c.accuracy() - 11859.0 / 12772.0).abs() < 1e-15);
        assert!((p - 11859.0 / 12772.0 / 2.0).abs() < 1e-15);
        assert_eq!(r, 0.5);
        let f_neg = 2.0 * (11859.0 / 12772.0) / (11859.0 / 12772.0 + 1.0);
        assert!((f - f_neg / 2.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = [0, 1, 1, 0];
        let preds: Vec<Prediction> = truth
            .iter()
            .map(|&y| Prediction {
                label: y,
                score: f64::from(y),
            })
            .collect();
        let m = score(&preds, &truth).unwrap();
        assert_eq!((m.acc, m.prec, m.rec, m.f1, m.auc), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        // Pairs (pos, neg): (0.5,0.1) win, (0.5,0.5) tie, (0.5,0.7) loss,
        // (0.9, *) 3 wins, (0.1, 0.1) tie, (0.1, 0.5) and (0.1, 0.7) losses.
        let a = auc(&[0.5, 0.9, 0.1, 0.1, 0.5, 0.7], &[1, 1, 1, 0, 0, 0]).unwrap();
        assert!((a - 5.0 / 9.0).abs() < 1e-15);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    fn seq(fs: &[&str]) -> FeatureSequence {
        FeatureSequence::from_features(VariantId::Tok, fs.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn vocabulary_sees_only_training_rows() {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            seqs.push(seq(&["common", if i % 2 == 0 { "even" } else { "odd" }]));
            labels.push((i % 2) as u8);
        }
        let plan = stratified_folds(&labels, 5, 1).unwrap();
        let probe = plan.folds[2][0];
        seqs[probe] = seq(&["leak", "common"]);
        let opts = CvOptions::default();
        for f in 0..plan.k {
            let data = prepare_fold(&seqs, &labels, &plan, f, None, &opts).unwrap();
            assert_eq!(data.vocab.index_of("leak").is_some(), f != 2);
        }
    }

    #[test]
    fn smote_fills_training_minority_only() {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let y = u8::from(i % 5 == 0);
            seqs.push(seq(&[if y == 1 { "bad" } else { "fine" }, &format!("w{}", i % 7)]));
            labels.push(y);
        }
        let plan = stratified_folds(&labels, 5, 9).unwrap();
        let opts = CvOptions {
            smote: Some(SmoteConfig::default()),
            ..Default::default()
        };
        let data = prepare_fold(&seqs, &labels, &plan, 0, None, &opts).unwrap();
        let pos = data.train_labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(pos * 2, data.train_labels.len());
        assert_eq!(data.n_synthetic, 24 - 6);
        assert_eq!(data.test_labels.len(), 8);
        assert!(prepare_fold(&seqs, &labels, &plan, 0, Some(8), &opts).is_err());
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let y = u8::from(i % 3 == 0);
            seqs.push(seq(&[if y == 1 { "bad" } else { "fine" }, &format!("w{}", i % 4)]));
            labels.push(y);
        }
        let plan = stratified_folds(&labels, 5, 2).unwrap();
        let spec = ModelSpec::default_for(Family::Lr);
        let a = cross_validate(&spec, &seqs, &labels, &plan, &CvOptions::default(), 5).unwrap();
        let b = cross_validate(&spec, &seqs, &labels, &plan, &CvOptions::default(), 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.len(), 5);
        assert!(a.mean.f1 >= 0.95);
    }
}
