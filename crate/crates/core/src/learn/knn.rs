//! k-nearest neighbours under cosine distance. Ties in distance go to the
//! lower training row; a row with no features is at distance 1 from
//! everything. The score is the class-weighted positive vote fraction.

use serde::{Deserialize, Serialize};

use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::vectorize::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    train: SparseMatrix,
    labels: Vec<u8>,
    weights: ClassWeights,
}

pub(crate) fn fit(p: &KnnParams, x: &SparseMatrix, labels: &[u8], weights: ClassWeights) -> KnnModel {
    KnnModel {
        k: p.k,
        train: x.clone(),
        labels: labels.to_vec(),
        weights,
    }
}

/// Column-major postings of the training rows, for accumulating all dot
/// products of a query at once.
struct Postings {
    start: Vec<usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl Postings {
    fn new(m: &SparseMatrix) -> Self {
        let mut start = vec![0usize; m.n_cols() + 1];
        for row in m.rows() {
            for (j, _) in row.iter() {
                start[j + 1] += 1;
            }
        }
        for j in 0..m.n_cols() {
            start[j + 1] += start[j];
        }
        let mut fill = start.clone();
        let mut rows = vec![0u32; m.nnz()];
        let mut values = vec![0.0; m.nnz()];
        for (i, row) in m.rows().enumerate() {
            for (j, v) in row.iter() {
                rows[fill[j]] = i as u32;
                values[fill[j]] = v;
                fill[j] += 1;
            }
        }
        Postings { start, rows, values }
    }
}

/// Cosine distance; 1 when either side is empty.
pub fn cosine_distance(a: SparseRow<'_>, b: SparseRow<'_>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - a.dot(&b) / (na * nb)
    }
}

impl KnnModel {
    fn neighbours(&self, post: &Postings, norms: &[f64], q: SparseRow<'_>) -> Vec<usize> {
        let n = self.labels.len();
        let mut dist = vec![1.0; n];
        let qn = q.norm();
        if qn > 0.0 {
            let mut dot = vec![0.0; n];
            for (j, v) in q.iter() {
                for p in post.start[j]..post.start[j + 1] {
                    dot[post.rows[p] as usize] += v * post.values[p];
                }
            }
            for i in 0..n {
                if norms[i] > 0.0 {
                    dist[i] = 1.0 - dot[i] / (qn * norms[i]);
                }
            }
        }
        let k = self.k.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let by = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
        if k < n {
            order.select_nth_unstable_by(k - 1, by);
            order.truncate(k);
        }
        order.sort_by(by);
        order
    }

    /// Indices of the `k` nearest training rows of each query, nearest first.
    pub fn kneighbors(&self, x: &SparseMatrix, exec: Execution) -> Result<Vec<Vec<usize>>> {
        if x.n_cols() != self.train.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "kNN trained on {} features, got {}",
                self.train.n_cols(),
                x.n_cols()
            )));
        }
        let post = Postings::new(&self.train);
        let norms: Vec<f64> = self.train.rows().map(|r| r.norm()).collect();
        Ok(exec.map_range(x.n_rows(), |i| self.neighbours(&post, &norms, x.row(i))))
    }

    pub fn scores(&self, x: &SparseMatrix, exec: Execution) -> Result<Vec<f64>> {
        Ok(self
            .kneighbors(x, exec)?
            .into_iter()
            .map(|nn| {
                let (mut pos, mut all) = (0.0, 0.0);
                for i in nn {
                    let w = self.weights.of(self.labels[i]);
                    all += w;
                    if self.labels[i] == 1 {
                        pos += w;
                    }
                }
                pos / all
            })
            .collect())
    }
}
