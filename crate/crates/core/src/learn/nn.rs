//! Shared pieces of the gradient-trained families: activations, the
//! weighted logistic loss, Adam and the minibatch loop.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of logit `z` against `y`, and its derivative in `z`.
pub fn logistic_loss(z: f64, y: u8) -> (f64, f64) {
    let y = f64::from(y);
    (softplus(z) - y * z, sigmoid(z) - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

pub struct Adam {
    cfg: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: AdamParams) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamParams { learning_rate, beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

/// Glorot-uniform fill: `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in out {
        *x = rng.random_range(-r..r);
    }
}

/// Inverted dropout mask: each unit kept with probability `1 - p` and
/// scaled by `1 / (1 - p)`.
pub fn dropout_mask(rng: &mut Rng, p: f64, n: usize) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..n).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect()
}

/// A differentiable training objective over a fixed dataset.
pub trait Objective {
    fn n_params(&self) -> usize;

    fn n_samples(&self) -> usize;

    /// Mean weighted loss over `rows` at `params`. With `dropout`, masks are
    /// drawn from it; without, the network runs deterministically. When
    /// `grad` is given the gradient of the returned value is added to it.
    fn loss(&self, params: &[f64], rows: &[usize], dropout: Option<&mut Rng>, grad: Option<&mut [f64]>) -> f64;

    /// Which side of every non-differentiable point (ReLU, max-pool argmax,
    /// hinge) the objective sits on at `params`. Equal patterns mean the
    /// objective is smooth between the two points.
    fn pattern(&self, _params: &[f64], _rows: &[usize]) -> Vec<u32> {
        Vec::new()
    }

    fn full_loss(&self, params: &[f64]) -> f64 {
        let rows: Vec<usize> = (0..self.n_samples()).collect();
        self.loss(params, &rows, None, None)
    }
}

pub struct Schedule {
    pub adam: AdamParams,
    pub epochs: usize,
    pub batch_size: usize,
}

/// Shuffled minibatch Adam. Returns the deterministic full-data loss before
/// training and after each epoch when `track` is set.
pub fn fit_adam<O: Objective>(obj: &O, params: &mut [f64], sched: &Schedule, seed: u64, track: bool) -> Vec<f64> {
    let mut opt = Adam::new(params.len(), sched.adam);
    let mut order_rng = seed::rng(seed, "minibatch");
    let mut dropout_rng = seed::rng(seed, "dropout");
    let mut order: Vec<usize> = (0..obj.n_samples()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut history = Vec::new();
    if track {
        history.push(obj.full_loss(params));
    }
    for _ in 0..sched.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(sched.batch_size.max(1)) {
            grad.fill(0.0);
            obj.loss(params, batch, Some(&mut dropout_rng), Some(&mut grad));
            opt.step(params, &grad);
        }
        if track {
            history.push(obj.full_loss(params));
        }
    }
    history
}
