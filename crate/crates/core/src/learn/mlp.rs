//! Feed-forward network over TF-IDF rows: ReLU hidden layers with dropout
//! and a single sigmoid output.

use serde::{Deserialize, Serialize};

use super::nn::{self, AdamParams, Objective, Schedule};
use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::vectorize::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![128],
            dropout: 0.5,
            epochs: 10,
            batch_size: 32,
            adam: AdamParams::default(),
        }
    }
}

/// Layer sizes and parameter offsets. Layer `l` stores `W_l` row-major
/// (`in x out`) followed by `b_l`; the output unit's weights and bias come last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Shape {
    n_inputs: usize,
    hidden: Vec<usize>,
}

impl Shape {
    fn fan_in(&self, l: usize) -> usize {
        if l == 0 {
            self.n_inputs
        } else {
            self.hidden[l - 1]
        }
    }

    /// `(weights offset, bias offset)` of hidden layer `l`.
    fn layer(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += (self.fan_in(k) + 1) * self.hidden[k];
        }
        (off, off + self.fan_in(l) * self.hidden[l])
    }

    fn output(&self) -> usize {
        self.layer(self.hidden.len() - 1).1 + self.hidden[self.hidden.len() - 1]
    }

    fn n_params(&self) -> usize {
        self.output() + self.hidden[self.hidden.len() - 1] + 1
    }

    fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed, "mlp-init");
        let mut p = vec![0.0; self.n_params()];
        for l in 0..self.hidden.len() {
            let (w, b) = self.layer(l);
            nn::glorot(&mut rng, self.fan_in(l), self.hidden[l], &mut p[w..b]);
        }
        let out = self.output();
        let last = self.hidden[self.hidden.len() - 1];
        nn::glorot(&mut rng, last, 1, &mut p[out..out + last]);
        p
    }
}

struct Trace {
    /// Pre-activations per hidden layer.
    pre: Vec<Vec<f64>>,
    /// Post-ReLU, post-dropout activations per hidden layer.
    act: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    logit: f64,
}

fn forward(shape: &Shape, p: &[f64], x: SparseRow<'_>, dropout: Option<(&mut Rng, f64)>) -> Trace {
    let mut dropout = dropout;
    let mut pre = Vec::with_capacity(shape.hidden.len());
    let mut act: Vec<Vec<f64>> = Vec::with_capacity(shape.hidden.len());
    let mut masks = Vec::with_capacity(shape.hidden.len());
    for (l, &width) in shape.hidden.iter().enumerate() {
        let (w, b) = shape.layer(l);
        let mut z = p[b..b + width].to_vec();
        if l == 0 {
            for (j, v) in x.iter() {
                let row = &p[w + j * width..w + (j + 1) * width];
                z.iter_mut().zip(row).for_each(|(z, &wj)| *z += v * wj);
            }
        } else {
            for (i, &h) in act[l - 1].iter().enumerate() {
                if h != 0.0 {
                    let row = &p[w + i * width..w + (i + 1) * width];
                    z.iter_mut().zip(row).for_each(|(z, &wi)| *z += h * wi);
                }
            }
        }
        let mut a: Vec<f64> = z.iter().map(|&z| z.max(0.0)).collect();
        let mask = match dropout.as_mut() {
            Some((rng, rate)) if *rate > 0.0 => {
                let m = nn::dropout_mask(rng, *rate, width);
                a.iter_mut().zip(&m).for_each(|(a, m)| *a *= m);
                Some(m)
            }
            _ => None,
        };
        pre.push(z);
        act.push(a);
        masks.push(mask);
    }
    let out = shape.output();
    let last = act.last().expect("at least one hidden layer");
    let logit = p[out + last.len()] + last.iter().zip(&p[out..]).map(|(h, w)| h * w).sum::<f64>();
    Trace { pre, act, masks, logit }
}

fn backward(shape: &Shape, p: &[f64], x: SparseRow<'_>, t: &Trace, dlogit: f64, g: &mut [f64]) {
    let n_layers = shape.hidden.len();
    let out = shape.output();
    let last = &t.act[n_layers - 1];
    for (k, &h) in last.iter().enumerate() {
        g[out + k] += dlogit * h;
    }
    g[out + last.len()] += dlogit;
    let mut dact: Vec<f64> = p[out..out + last.len()].iter().map(|w| dlogit * w).collect();
    for l in (0..n_layers).rev() {
        let width = shape.hidden[l];
        let (w, b) = shape.layer(l);
        let mut dz = dact;
        if let Some(m) = &t.masks[l] {
            dz.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
        }
        dz.iter_mut().zip(&t.pre[l]).for_each(|(d, &z)| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        g[b..b + width].iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
        if l == 0 {
            for (j, v) in x.iter() {
                let row = &mut g[w + j * width..w + (j + 1) * width];
                row.iter_mut().zip(&dz).for_each(|(g, d)| *g += v * d);
            }
            dact = Vec::new();
        } else {
            let prev = &t.act[l - 1];
            let mut dprev = vec![0.0; prev.len()];
            for (i, &h) in prev.iter().enumerate() {
                let wrow = &p[w + i * width..w + (i + 1) * width];
                dprev[i] = wrow.iter().zip(&dz).map(|(w, d)| w * d).sum();
                if h != 0.0 {
                    let grow = &mut g[w + i * width..w + (i + 1) * width];
                    grow.iter_mut().zip(&dz).for_each(|(g, d)| *g += h * d);
                }
            }
            dact = dprev;
        }
    }
}

pub(crate) struct MlpObjective<'a> {
    shape: Shape,
    dropout: f64,
    x: &'a SparseMatrix,
    labels: &'a [u8],
    weights: Vec<f64>,
}

impl<'a> MlpObjective<'a> {
    pub(crate) fn new(p: &MlpParams, x: &'a SparseMatrix, labels: &'a [u8], weights: ClassWeights) -> Self {
        MlpObjective {
            shape: Shape {
                n_inputs: x.n_cols(),
                hidden: p.hidden.clone(),
            },
            dropout: p.dropout,
            x,
            labels,
            weights: weights.sample_weights(labels),
        }
    }

    pub(crate) fn init(&self, seed: u64) -> Vec<f64> {
        self.shape.init(seed)
    }
}

impl Objective for MlpObjective<'_> {
    fn n_params(&self) -> usize {
        self.shape.n_params()
    }

    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, params: &[f64], rows: &[usize], mut dropout: Option<&mut Rng>, mut grad: Option<&mut [f64]>) -> f64 {
        let scale = 1.0 / rows.len() as f64;
        let mut total = 0.0;
        for &i in rows {
            let x = self.x.row(i);
            let t = forward(&self.shape, params, x, dropout.as_deref_mut().map(|r| (r, self.dropout)));
            let (l, dl) = nn::logistic_loss(t.logit, self.labels[i]);
            total += self.weights[i] * l;
            if let Some(g) = grad.as_deref_mut() {
                backward(&self.shape, params, x, &t, scale * self.weights[i] * dl, g);
            }
        }
        total * scale
    }

    fn pattern(&self, params: &[f64], rows: &[usize]) -> Vec<u32> {
        let mut out = Vec::new();
        for &i in rows {
            let t = forward(&self.shape, params, self.x.row(i), None);
            out.extend(t.pre.iter().flatten().map(|&z| u32::from(z > 0.0)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    shape: Shape,
    #[serde(with = "crate::blob::f64s")]
    params: Vec<f64>,
}

impl Mlp {
    pub fn n_inputs(&self) -> usize {
        self.shape.n_inputs
    }

    pub fn scores(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.shape.n_inputs {
            return Err(Error::DimensionMismatch(format!(
                "MLP trained on {} features, got {}",
                self.shape.n_inputs,
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|r| nn::sigmoid(forward(&self.shape, &self.params, r, None).logit)).collect())
    }
}

pub(crate) fn fit(
    p: &MlpParams,
    x: &SparseMatrix,
    labels: &[u8],
    weights: ClassWeights,
    seed: u64,
    track: bool,
) -> Result<(Mlp, Vec<f64>)> {
    let obj = MlpObjective::new(p, x, labels, weights);
    let mut params = obj.init(seed);
    let sched = Schedule {
        adam: p.adam,
        epochs: p.epochs,
        batch_size: p.batch_size,
    };
    let history = nn::fit_adam(&obj, &mut params, &sched, seed, track);
    Ok((Mlp { shape: obj.shape, params }, history))
}
