//! Multinomial Naive Bayes over (TF-IDF) feature weights with additive
//! smoothing. Class weights scale both the feature mass and the priors.

use serde::{Deserialize, Serialize};

use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::vectorize::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    pub alpha: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    log_prior: [f64; 2],
    /// `ln theta_{c,j}`, class 0 then class 1.
    #[serde(with = "crate::blob::f64s")]
    log_theta: Vec<f64>,
}

pub(crate) fn fit(p: &NbParams, x: &SparseMatrix, labels: &[u8], weights: ClassWeights) -> Result<NaiveBayes> {
    let v = x.n_cols();
    if v == 0 {
        return Err(Error::Empty("vocabulary"));
    }
    let mut mass = vec![0.0; 2 * v];
    let mut prior = [0.0; 2];
    for (row, &y) in x.rows().zip(labels) {
        let w = weights.of(y);
        let c = usize::from(y);
        prior[c] += w;
        for (j, val) in row.iter() {
            mass[c * v + j] += w * val;
        }
    }
    let total_prior = prior[0] + prior[1];
    let mut log_theta = vec![0.0; 2 * v];
    for c in 0..2 {
        let class = &mass[c * v..(c + 1) * v];
        let denom = (class.iter().sum::<f64>() + p.alpha * v as f64).ln();
        for (lt, &m) in log_theta[c * v..(c + 1) * v].iter_mut().zip(class) {
            *lt = (m + p.alpha).ln() - denom;
        }
    }
    Ok(NaiveBayes {
        log_prior: [(prior[0] / total_prior).ln(), (prior[1] / total_prior).ln()],
        log_theta,
    })
}

impl NaiveBayes {
    pub fn n_features(&self) -> usize {
        self.log_theta.len() / 2
    }

    /// Unnormalised log joint `ln P(c) + sum_j x_j ln theta_{c,j}` per class.
    pub fn log_joint(&self, x: &SparseMatrix) -> Result<Vec<[f64; 2]>> {
        let v = self.n_features();
        if x.n_cols() != v {
            return Err(Error::DimensionMismatch(format!("NB trained on {v} features, got {}", x.n_cols())));
        }
        Ok(x
            .rows()
            .map(|row| {
                let mut lj = self.log_prior;
                for (j, val) in row.iter() {
                    lj[0] += val * self.log_theta[j];
                    lj[1] += val * self.log_theta[v + j];
                }
                lj
            })
            .collect())
    }

    /// Posterior probability of the harmful class.
    pub fn scores(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        Ok(self.log_joint(x)?.into_iter().map(|[l0, l1]| super::nn::sigmoid(l1 - l0)).collect())
    }
}
