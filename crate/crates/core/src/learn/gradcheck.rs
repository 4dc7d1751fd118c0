//! Finite-difference verification of the analytic gradients.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::cnn::CnnObjective;
use super::linear::{LinearObjective, Loss};
use super::mlp::MlpObjective;
use super::nn::Objective;
use super::{Inputs, ModelSpec};
use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::seed;

/// Number of parameters compared (all of them if the model has fewer).
pub const CHECKED_PARAMS: usize = 200;

/// Data and parameter point for [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradientBatch<'a> {
    pub inputs: Inputs<'a>,
    pub labels: &'a [u8],
    pub weights: ClassWeights,
    /// Seeds the parameter point and the checked subset.
    pub seed: u64,
}

impl<'a> GradientBatch<'a> {
    pub fn new(inputs: Inputs<'a>, labels: &'a [u8]) -> Self {
        GradientBatch {
            inputs,
            labels,
            weights: ClassWeights::UNIT,
            seed: 0,
        }
    }
}

/// `|a - n| / max(|a|, |n|)`, zero when both vanish; the denominator is
/// floored at `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Parameters passed over because a `+-epsilon` step crossed a kink.
    pub skipped_at_kinks: usize,
}

/// Maximum relative error between the analytic gradient of the weighted
/// training loss (dropout off) and central differences with step `epsilon`.
/// Linear models are checked at a random point away from hinge kinks,
/// networks at their initialisation.
pub fn gradient_check(spec: &ModelSpec, batch: &GradientBatch<'_>, epsilon: f64) -> Result<f64> {
    Ok(gradient_check_report(spec, batch, epsilon)?.max_relative_error)
}

/// [`gradient_check`] with counts. Parameters are visited in random order;
/// one whose perturbation changes a ReLU sign, a pooling argmax or a hinge
/// side is skipped, until [`CHECKED_PARAMS`] smooth ones are compared.
pub fn gradient_check_report(spec: &ModelSpec, batch: &GradientBatch<'_>, epsilon: f64) -> Result<GradientReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if batch.labels.is_empty() {
        return Err(Error::Empty("gradient-check batch"));
    }
    if batch.labels.len() != batch.inputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} rows",
            batch.labels.len(),
            batch.inputs.len()
        )));
    }
    spec.validate()?;
    let family = spec.family();
    let (labels, w, s) = (batch.labels, batch.weights, batch.seed);
    match spec {
        ModelSpec::NB(_) | ModelSpec::KNN(_) | ModelSpec::RF(_) => {
            Err(Error::InvalidArgument(format!("{family} has no gradient")))
        }
        ModelSpec::LR(p) => {
            let obj = LinearObjective::new(Loss::Logistic, p.lambda, batch.inputs.sparse(family)?, labels, w);
            let params = random_point(&obj, s, |_| true);
            Ok(compare(&obj, params, epsilon, s))
        }
        ModelSpec::SVM(p) => {
            let x = batch.inputs.sparse(family)?;
            let obj = LinearObjective::new(Loss::Hinge, p.lambda, x, labels, w);
            let away_from_kinks = |params: &[f64]| {
                let d = x.n_cols();
                x.rows().zip(labels).all(|(r, &y)| {
                    let s = if y == 1 { 1.0 } else { -1.0 };
                    (1.0 - s * (r.dot_dense(&params[..d]) + params[d])).abs() > 1e3 * epsilon
                })
            };
            let params = random_point(&obj, s, away_from_kinks);
            Ok(compare(&obj, params, epsilon, s))
        }
        ModelSpec::MLP(p) => {
            let obj = MlpObjective::new(p, batch.inputs.sparse(family)?, labels, w);
            let params = obj.init(s);
            Ok(compare(&obj, params, epsilon, s))
        }
        ModelSpec::CNN1L(p) | ModelSpec::CNN2L(p) => {
            let layers = if matches!(spec, ModelSpec::CNN1L(_)) { 1 } else { 2 };
            let (seqs, n_ids) = batch.inputs.indices(family)?;
            let obj = CnnObjective::new(p, layers, seqs, n_ids, labels, w)?;
            let params = obj.init(s);
            Ok(compare(&obj, params, epsilon, s))
        }
    }
}

fn random_point<O: Objective>(obj: &O, seed: u64, accept: impl Fn(&[f64]) -> bool) -> Vec<f64> {
    let mut rng = seed::rng(seed, "gradcheck-point");
    let mut params = vec![0.0; obj.n_params()];
    for _ in 0..1000 {
        params.iter_mut().for_each(|p| *p = rng.random_range(-0.5..0.5));
        if accept(&params) {
            break;
        }
    }
    params
}

fn compare<O: Objective>(obj: &O, mut params: Vec<f64>, epsilon: f64, seed: u64) -> GradientReport {
    let rows: Vec<usize> = (0..obj.n_samples()).collect();
    let mut grad = vec![0.0; params.len()];
    obj.loss(&params, &rows, None, Some(&mut grad));
    let base = obj.pattern(&params, &rows);
    let n = params.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, "gradcheck-subset"));
    let mut report = GradientReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    for k in order {
        if report.checked == CHECKED_PARAMS {
            break;
        }
        let orig = params[k];
        params[k] = orig + epsilon;
        let up = obj.loss(&params, &rows, None, None);
        let smooth_up = obj.pattern(&params, &rows) == base;
        params[k] = orig - epsilon;
        let down = obj.loss(&params, &rows, None, None);
        let smooth_down = obj.pattern(&params, &rows) == base;
        params[k] = orig;
        if !(smooth_up && smooth_down) {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * epsilon);
        report.checked += 1;
        report.max_relative_error = report.max_relative_error.max(relative_error(grad[k], numeric));
    }
    report
}
