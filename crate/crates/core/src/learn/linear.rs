//! Linear models over TF-IDF rows: L2-regularised logistic regression and
//! linear SVM (hinge loss). Parameters are `[w_0 .. w_{d-1}, b]`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::nn::{self, Objective};
use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::vectorize::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrParams {
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop when an iteration improves the objective by less than
    /// `tol * max(1, |f|)` or the gradient norm falls below `tol`.
    pub tol: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            lambda: 1e-4,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmSolver {
    /// Stochastic subgradient with step `1 / (lambda t)` and projection.
    Pegasos,
    /// Full-batch subgradient descent with a fixed step.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub solver: SvmSolver,
    /// Step size of the full-batch solver.
    pub learning_rate: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 20,
            solver: SvmSolver::Pegasos,
            learning_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    Logistic,
    Hinge,
}

pub(crate) struct LinearObjective<'a> {
    loss: Loss,
    lambda: f64,
    x: &'a SparseMatrix,
    labels: &'a [u8],
    weights: Vec<f64>,
}

impl<'a> LinearObjective<'a> {
    pub(crate) fn new(loss: Loss, lambda: f64, x: &'a SparseMatrix, labels: &'a [u8], weights: ClassWeights) -> Self {
        LinearObjective {
            loss,
            lambda,
            x,
            labels,
            weights: weights.sample_weights(labels),
        }
    }
}

fn sign(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

impl Objective for LinearObjective<'_> {
    fn n_params(&self) -> usize {
        self.x.n_cols() + 1
    }

    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    /// Logistic: mean weighted log-loss plus `lambda/2 |w|^2`. Hinge: mean
    /// weighted hinge plus `lambda/2 (|w|^2 + b^2)`, the bias acting as a
    /// constant feature.
    fn loss(&self, params: &[f64], rows: &[usize], _dropout: Option<&mut Rng>, mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.x.n_cols();
        let (w, b) = (&params[..d], params[d]);
        let scale = 1.0 / rows.len() as f64;
        let mut total = 0.0;
        for &i in rows {
            let row = self.x.row(i);
            let z = row.dot_dense(w) + b;
            let c = self.weights[i];
            let (l, dz) = match self.loss {
                Loss::Logistic => nn::logistic_loss(z, self.labels[i]),
                Loss::Hinge => {
                    let s = sign(self.labels[i]);
                    let m = 1.0 - s * z;
                    if m > 0.0 {
                        (m, -s)
                    } else {
                        (0.0, 0.0)
                    }
                }
            };
            total += c * l;
            if let Some(g) = grad.as_deref_mut() {
                if dz != 0.0 {
                    let k = scale * c * dz;
                    for (j, v) in row.iter() {
                        g[j] += k * v;
                    }
                    g[d] += k;
                }
            }
        }
        let mut reg = w.iter().map(|v| v * v).sum::<f64>();
        if self.loss == Loss::Hinge {
            reg += b * b;
        }
        if let Some(g) = grad {
            for j in 0..d {
                g[j] += self.lambda * w[j];
            }
            if self.loss == Loss::Hinge {
                g[d] += self.lambda * b;
            }
        }
        total * scale + 0.5 * self.lambda * reg
    }

    fn pattern(&self, params: &[f64], rows: &[usize]) -> Vec<u32> {
        if self.loss == Loss::Logistic {
            return Vec::new();
        }
        let d = self.x.n_cols();
        rows.iter()
            .map(|&i| {
                let z = self.x.row(i).dot_dense(&params[..d]) + params[d];
                u32::from(1.0 - sign(self.labels[i]) * z > 0.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(with = "crate::blob::f64s")]
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel { weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn from_params(mut p: Vec<f64>) -> Self {
        let bias = p.pop().expect("bias entry");
        LinearModel { weights: p, bias }
    }

    /// `w . x + b` per row.
    pub fn margins(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "linear model has {} weights, input has {} columns",
                self.weights.len(),
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|r| r.dot_dense(&self.weights) + self.bias).collect())
    }
}

/// Full-batch gradient descent with Armijo backtracking. The step doubles
/// after each accepted iteration and halves until sufficient decrease.
pub(crate) fn fit_lr(p: &LrParams, x: &SparseMatrix, labels: &[u8], weights: ClassWeights, track: bool) -> (LinearModel, Vec<f64>) {
    let obj = LinearObjective::new(Loss::Logistic, p.lambda, x, labels, weights);
    let rows: Vec<usize> = (0..labels.len()).collect();
    let n = obj.n_params();
    let mut params = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut f = obj.loss(&params, &rows, None, Some(&mut grad));
    let mut history = Vec::new();
    if track {
        history.push(f);
    }
    let mut step = 1.0;
    let mut trial = vec![0.0; n];
    for _ in 0..p.max_iter {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < p.tol {
            break;
        }
        let mut accepted = None;
        while step > 1e-20 {
            trial.iter_mut().zip(&params).zip(&grad).for_each(|((t, p), g)| *t = p - step * g);
            let ft = obj.full_loss(&trial);
            if ft <= f - 0.5 * step * g2 {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else { break };
        std::mem::swap(&mut params, &mut trial);
        let improvement = f - f_new;
        grad.fill(0.0);
        f = obj.loss(&params, &rows, None, Some(&mut grad));
        if track {
            history.push(f);
        }
        step *= 2.0;
        if improvement < p.tol * f.abs().max(1.0) {
            break;
        }
    }
    (LinearModel::from_params(params), history)
}

pub(crate) fn fit_svm(
    p: &SvmParams,
    x: &SparseMatrix,
    labels: &[u8],
    weights: ClassWeights,
    seed: u64,
    track: bool,
) -> (LinearModel, Vec<f64>) {
    let obj = LinearObjective::new(Loss::Hinge, p.lambda, x, labels, weights);
    let mut history = Vec::new();
    let mut params = vec![0.0; obj.n_params()];
    if track {
        history.push(obj.full_loss(&params));
    }
    match p.solver {
        SvmSolver::Subgradient => {
            let rows: Vec<usize> = (0..labels.len()).collect();
            let mut grad = vec![0.0; params.len()];
            for _ in 0..p.epochs {
                grad.fill(0.0);
                obj.loss(&params, &rows, None, Some(&mut grad));
                params.iter_mut().zip(&grad).for_each(|(w, g)| *w -= p.learning_rate * g);
                if track {
                    history.push(obj.full_loss(&params));
                }
            }
        }
        SvmSolver::Pegasos => pegasos(&obj, p, seed, &mut params, track.then_some(&mut history)),
    }
    (LinearModel::from_params(params), history)
}

/// Pegasos on the weighted hinge objective. The iterate is kept as
/// `scale * v` so the per-step shrink is O(1), and is projected onto the
/// ball of radius `sqrt(mean(c) / lambda)`, which contains the optimum.
/// Returns the mean of the iterates of the final epoch.
fn pegasos(obj: &LinearObjective<'_>, p: &SvmParams, seed: u64, out: &mut [f64], mut history: Option<&mut Vec<f64>>) {
    let x = obj.x;
    let d = x.n_cols();
    let n = obj.labels.len();
    let radius = (obj.weights.iter().sum::<f64>() / n as f64 / p.lambda).sqrt();
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut vnorm2 = 0.0;
    let mut t = 0u64;
    let mut rng = seed::rng(seed, "svm-order");
    let mut order: Vec<usize> = (0..n).collect();
    let mut tail = vec![0.0; d + 1];
    for epoch in 0..p.epochs {
        let last_epoch = epoch + 1 == p.epochs;
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (p.lambda * t as f64);
            let row = x.row(i);
            let mut vx = row.dot_dense(&v[..d]) + v[d];
            let s = sign(obj.labels[i]);
            let violated = s * scale * vx < 1.0;
            if t == 1 {
                v.fill(0.0);
                scale = 1.0;
                vnorm2 = 0.0;
                vx = 0.0;
            } else {
                scale *= 1.0 - 1.0 / t as f64;
            }
            if violated {
                let alpha = eta * obj.weights[i] * s / scale;
                let xnorm2 = row.norm().powi(2) + 1.0;
                vnorm2 += 2.0 * alpha * vx + alpha * alpha * xnorm2;
                for (j, val) in row.iter() {
                    v[j] += alpha * val;
                }
                v[d] += alpha;
            }
            let wnorm = scale * vnorm2.max(0.0).sqrt();
            if wnorm > radius {
                scale *= radius / wnorm;
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|x| *x *= scale);
                vnorm2 = v.iter().map(|x| x * x).sum();
                scale = 1.0;
            }
            if last_epoch {
                tail.iter_mut().zip(&v).for_each(|(t, x)| *t += scale * x);
            }
        }
        vnorm2 = v.iter().map(|x| x * x).sum();
        if let Some(h) = history.as_deref_mut() {
            let w: Vec<f64> = if last_epoch {
                tail.iter().map(|t| t / n as f64).collect()
            } else {
                v.iter().map(|x| x * scale).collect()
            };
            h.push(obj.full_loss(&w));
        }
    }
    if p.epochs == 0 {
        return;
    }
    out.iter_mut().zip(&tail).for_each(|(o, t)| *o = t / n as f64);
}
