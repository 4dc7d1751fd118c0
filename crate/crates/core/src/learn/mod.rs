//! The classifier families: multinomial Naive Bayes, k-nearest neighbours,
//! linear SVM, logistic regression, random forest, MLP and the
//! embedding-based CNNs (one or two convolutional layers).
//!
//! All families except the CNNs read TF-IDF rows ([`Inputs::Sparse`]); the
//! CNNs read fixed-length id sequences ([`Inputs::Indices`]). Training is
//! deterministic given `(spec, data, seed)`.

mod cnn;
mod forest;
mod gradcheck;
mod knn;
mod linear;
mod mlp;
mod nb;
mod nn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cnn::{Cnn, CnnParams, Padding};
pub use forest::{DecisionTree, Forest, MaxFeatures, RfParams, TreeParams};
pub use gradcheck::{gradient_check, gradient_check_report, relative_error, GradientBatch, GradientReport, CHECKED_PARAMS};
pub use knn::{cosine_distance, KnnModel, KnnParams};
pub use linear::{LinearModel, LrParams, SvmParams, SvmSolver};
pub use mlp::{Mlp, MlpParams};
pub use nb::{NaiveBayes, NbParams};
pub use nn::AdamParams;

use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::vectorize::{IndexSequence, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "CNN1L")]
    Cnn1l,
    #[serde(rename = "CNN2L")]
    Cnn2l,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Nb,
        Family::Knn,
        Family::Svm,
        Family::Lr,
        Family::Rf,
        Family::Mlp,
        Family::Cnn1l,
        Family::Cnn2l,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Nb => "NB",
            Family::Knn => "KNN",
            Family::Svm => "SVM",
            Family::Lr => "LR",
            Family::Rf => "RF",
            Family::Mlp => "MLP",
            Family::Cnn1l => "CNN1L",
            Family::Cnn2l => "CNN2L",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Family::Mlp | Family::Cnn1l | Family::Cnn2l)
    }

    /// CNNs take id sequences; everything else TF-IDF rows.
    pub fn uses_indices(self) -> bool {
        matches!(self, Family::Cnn1l | Family::Cnn2l)
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, Family::Nb | Family::Knn | Family::Rf)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts `kNN`, `CNN-2L`, `cnn2l`...
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown classifier {s:?}")))
    }
}

/// A family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum ModelSpec {
    NB(NbParams),
    KNN(KnnParams),
    SVM(SvmParams),
    LR(LrParams),
    RF(RfParams),
    MLP(MlpParams),
    CNN1L(CnnParams),
    CNN2L(CnnParams),
}

impl ModelSpec {
    pub fn default_for(family: Family) -> ModelSpec {
        match family {
            Family::Nb => ModelSpec::NB(NbParams::default()),
            Family::Knn => ModelSpec::KNN(KnnParams::default()),
            Family::Svm => ModelSpec::SVM(SvmParams::default()),
            Family::Lr => ModelSpec::LR(LrParams::default()),
            Family::Rf => ModelSpec::RF(RfParams::default()),
            Family::Mlp => ModelSpec::MLP(MlpParams::default()),
            Family::Cnn1l => ModelSpec::CNN1L(CnnParams::default()),
            Family::Cnn2l => ModelSpec::CNN2L(CnnParams::default()),
        }
    }

    /// Defaults for `family` with the keys of `overrides` (a JSON object)
    /// replaced. Unknown keys are rejected.
    pub fn with_overrides(family: Family, overrides: &serde_json::Value) -> Result<ModelSpec> {
        let mut value = serde_json::to_value(ModelSpec::default_for(family))?;
        if let Some(obj) = overrides.as_object() {
            let params = value["params"].as_object_mut().expect("params are a JSON object");
            for (k, v) in obj {
                params.insert(k.clone(), v.clone());
            }
        } else if !overrides.is_null() {
            return Err(Error::Config(format!("overrides for {family} must be a JSON object")));
        }
        let spec: ModelSpec =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("{family} hyperparameters: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::NB(_) => Family::Nb,
            ModelSpec::KNN(_) => Family::Knn,
            ModelSpec::SVM(_) => Family::Svm,
            ModelSpec::LR(_) => Family::Lr,
            ModelSpec::RF(_) => Family::Rf,
            ModelSpec::MLP(_) => Family::Mlp,
            ModelSpec::CNN1L(_) => Family::Cnn1l,
            ModelSpec::CNN2L(_) => Family::Cnn2l,
        }
    }

    /// The CNN input length, if this is a CNN.
    pub fn max_len(&self) -> Option<usize> {
        match self {
            ModelSpec::CNN1L(p) | ModelSpec::CNN2L(p) => Some(p.max_len),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.family())));
        let check_lr = |lr: f64| lr > 0.0 && lr.is_finite();
        let check_dropout = |p: f64| (0.0..1.0).contains(&p);
        match self {
            ModelSpec::NB(p) if !(p.alpha > 0.0) => bad("alpha must be > 0".into()),
            ModelSpec::KNN(p) if p.k == 0 => bad("k must be >= 1".into()),
            ModelSpec::SVM(p) if !(p.lambda > 0.0) || p.epochs == 0 => bad("lambda > 0 and epochs >= 1 required".into()),
            ModelSpec::LR(p) if !(p.lambda >= 0.0) || p.max_iter == 0 => bad("lambda >= 0 and max_iter >= 1 required".into()),
            ModelSpec::RF(p) if p.n_trees == 0 => bad("trees must be >= 1".into()),
            ModelSpec::RF(p) if matches!(p.max_features, MaxFeatures::Count(0)) => bad("max_features must be >= 1".into()),
            ModelSpec::MLP(p) if !check_lr(p.adam.learning_rate) || !check_dropout(p.dropout) => {
                bad("learning rate > 0 and dropout in [0,1) required".into())
            }
            ModelSpec::MLP(p) if p.hidden.is_empty() || p.hidden.contains(&0) || p.batch_size == 0 => {
                bad("hidden layers and batch size must be non-empty/positive".into())
            }
            ModelSpec::CNN1L(p) | ModelSpec::CNN2L(p) => {
                if !check_lr(p.adam.learning_rate) || !check_dropout(p.dropout) {
                    return bad("learning rate > 0 and dropout in [0,1) required".into());
                }
                let layers = if self.family() == Family::Cnn1l { 1 } else { 2 };
                p.geometry(layers).map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

/// Model input: TF-IDF rows or id sequences with their id-space size (`V + 2`).
#[derive(Debug, Clone, Copy)]
pub enum Inputs<'a> {
    Sparse(&'a SparseMatrix),
    Indices { seqs: &'a [IndexSequence], n_ids: usize },
}

impl Inputs<'_> {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Sparse(m) => m.n_rows(),
            Inputs::Indices { seqs, .. } => seqs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sparse(&self, family: Family) -> Result<&SparseMatrix> {
        match self {
            Inputs::Sparse(m) => Ok(m),
            Inputs::Indices { .. } => Err(Error::RepresentationMismatch(format!("{family} expects TF-IDF rows"))),
        }
    }

    fn indices(&self, family: Family) -> Result<(&[IndexSequence], usize)> {
        match self {
            Inputs::Indices { seqs, n_ids } => Ok((seqs, *n_ids)),
            Inputs::Sparse(_) => Err(Error::RepresentationMismatch(format!("{family} expects id sequences"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    /// Higher means more likely harmful.
    pub score: f64,
}

impl Prediction {
    fn thresholded(score: f64, threshold: f64) -> Self {
        Prediction {
            label: u8::from(score >= threshold),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "state")]
pub enum TrainedModel {
    NB(NaiveBayes),
    KNN(KnnModel),
    SVM(LinearModel),
    LR(LinearModel),
    RF(Forest),
    MLP(Mlp),
    CNN1L(Cnn),
    CNN2L(Cnn),
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        match self {
            TrainedModel::NB(_) => Family::Nb,
            TrainedModel::KNN(_) => Family::Knn,
            TrainedModel::SVM(_) => Family::Svm,
            TrainedModel::LR(_) => Family::Lr,
            TrainedModel::RF(_) => Family::Rf,
            TrainedModel::MLP(_) => Family::Mlp,
            TrainedModel::CNN1L(_) => Family::Cnn1l,
            TrainedModel::CNN2L(_) => Family::Cnn2l,
        }
    }

    /// Score above or at which the label is positive.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::SVM(_) => 0.0,
            _ => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    pub exec: Execution,
    /// Record the full-data training objective before training and after
    /// every epoch (iterative families only).
    pub track_loss: bool,
}

/// A fitted model plus its objective history (empty unless tracked).
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: TrainedModel,
    pub loss_history: Vec<f64>,
}

fn check_labels(labels: &[u8], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 training samples".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0/1")));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn train(spec: &ModelSpec, inputs: Inputs<'_>, labels: &[u8], weights: ClassWeights, seed: u64) -> Result<TrainedModel> {
    Ok(train_with(spec, inputs, labels, weights, seed, TrainOptions::default())?.model)
}

pub fn train_with(
    spec: &ModelSpec,
    inputs: Inputs<'_>,
    labels: &[u8],
    weights: ClassWeights,
    seed: u64,
    opts: TrainOptions,
) -> Result<Fitted> {
    spec.validate()?;
    let family = spec.family();
    check_labels(labels, inputs.len())?;
    let no_history = |model| Fitted { model, loss_history: Vec::new() };
    Ok(match spec {
        ModelSpec::NB(p) => no_history(TrainedModel::NB(nb::fit(p, inputs.sparse(family)?, labels, weights)?)),
        ModelSpec::KNN(p) => no_history(TrainedModel::KNN(knn::fit(p, inputs.sparse(family)?, labels, weights))),
        ModelSpec::RF(p) => no_history(TrainedModel::RF(forest::fit(p, inputs.sparse(family)?, labels, weights, seed, opts.exec)?)),
        ModelSpec::LR(p) => {
            let (m, h) = linear::fit_lr(p, inputs.sparse(family)?, labels, weights, opts.track_loss);
            Fitted { model: TrainedModel::LR(m), loss_history: h }
        }
        ModelSpec::SVM(p) => {
            let (m, h) = linear::fit_svm(p, inputs.sparse(family)?, labels, weights, seed, opts.track_loss);
            Fitted { model: TrainedModel::SVM(m), loss_history: h }
        }
        ModelSpec::MLP(p) => {
            let (m, h) = mlp::fit(p, inputs.sparse(family)?, labels, weights, seed, opts.track_loss)?;
            Fitted { model: TrainedModel::MLP(m), loss_history: h }
        }
        ModelSpec::CNN1L(p) | ModelSpec::CNN2L(p) => {
            let layers = if family == Family::Cnn1l { 1 } else { 2 };
            let (seqs, n_ids) = inputs.indices(family)?;
            let (m, h) = cnn::fit(p, layers, seqs, n_ids, labels, weights, seed, opts.track_loss)?;
            let model = if layers == 1 { TrainedModel::CNN1L(m) } else { TrainedModel::CNN2L(m) };
            Fitted { model, loss_history: h }
        }
    })
}

pub fn predict(model: &TrainedModel, inputs: Inputs<'_>) -> Result<Vec<Prediction>> {
    predict_with(model, inputs, Execution::Sequential)
}

pub fn predict_with(model: &TrainedModel, inputs: Inputs<'_>, exec: Execution) -> Result<Vec<Prediction>> {
    let family = model.family();
    let scores = match model {
        TrainedModel::NB(m) => m.scores(inputs.sparse(family)?)?,
        TrainedModel::KNN(m) => m.scores(inputs.sparse(family)?, exec)?,
        TrainedModel::SVM(m) | TrainedModel::LR(m) => {
            let raw = m.margins(inputs.sparse(family)?)?;
            if family == Family::Lr {
                raw.into_iter().map(nn::sigmoid).collect()
            } else {
                raw
            }
        }
        TrainedModel::RF(m) => m.scores(inputs.sparse(family)?, exec)?,
        TrainedModel::MLP(m) => m.scores(inputs.sparse(family)?)?,
        TrainedModel::CNN1L(m) | TrainedModel::CNN2L(m) => {
            let (seqs, n_ids) = inputs.indices(family)?;
            m.scores(seqs, n_ids, exec)?
        }
    };
    let t = model.threshold();
    Ok(scores.into_iter().map(|s| Prediction::thresholded(s, t)).collect())
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model file: a JSON envelope, parameter arrays as base64 blobs of
/// little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub format_version: u32,
    pub family: Family,
    pub spec: ModelSpec,
    pub seed: u64,
    pub model: TrainedModel,
}

pub fn save_model(spec: &ModelSpec, seed: u64, model: &TrainedModel) -> Result<String> {
    let env = ModelEnvelope {
        format_version: MODEL_FORMAT_VERSION,
        family: model.family(),
        spec: spec.clone(),
        seed,
        model: model.clone(),
    };
    Ok(serde_json::to_string(&env)?)
}

pub fn load_model(text: &str) -> Result<ModelEnvelope> {
    let env: ModelEnvelope = serde_json::from_str(text)?;
    if env.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Serde(format!("unsupported model format version {}", env.format_version)));
    }
    if env.family != env.model.family() || env.family != env.spec.family() {
        return Err(Error::Serde("model envelope family mismatch".into()));
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert_eq!("kNN".parse::<Family>().unwrap(), Family::Knn);
        assert_eq!("CNN-2L".parse::<Family>().unwrap(), Family::Cnn2l);
        assert!("GBM".parse::<Family>().is_err());
    }

    #[test]
    fn overrides_merge_and_reject_unknown_keys() {
        let spec = ModelSpec::with_overrides(Family::Knn, &serde_json::json!({"k": 3})).unwrap();
        assert_eq!(spec, ModelSpec::KNN(KnnParams { k: 3 }));
        assert!(ModelSpec::with_overrides(Family::Knn, &serde_json::json!({"kk": 3})).is_err());
        assert!(ModelSpec::with_overrides(Family::Knn, &serde_json::json!({"k": 0})).is_err());
        let cnn = ModelSpec::with_overrides(Family::Cnn2l, &serde_json::json!({"max_len": 16, "embed_dim": 8})).unwrap();
        assert_eq!(cnn.max_len(), Some(16));
    }

    #[test]
    fn defaults_validate() {
        for f in Family::ALL {
            ModelSpec::default_for(f).validate().unwrap();
        }
    }

    #[test]
    fn training_preconditions() {
        let m = SparseMatrix::from_dense(1, &[vec![1.0], vec![2.0]]).unwrap();
        let spec = ModelSpec::default_for(Family::Lr);
        let w = ClassWeights::UNIT;
        assert!(matches!(train(&spec, Inputs::Sparse(&m), &[1, 1], w, 0), Err(Error::SingleClass)));
        assert!(matches!(train(&spec, Inputs::Sparse(&m), &[1], w, 0), Err(Error::DimensionMismatch(_))));
        let seqs = [IndexSequence(vec![2]), IndexSequence(vec![3])];
        let idx = Inputs::Indices { seqs: &seqs, n_ids: 4 };
        assert!(matches!(train(&spec, idx, &[0, 1], w, 0), Err(Error::RepresentationMismatch(_))));
        let model = train(&spec, Inputs::Sparse(&m), &[0, 1], w, 0).unwrap();
        assert!(matches!(predict(&model, idx), Err(Error::RepresentationMismatch(_))));
    }
}
