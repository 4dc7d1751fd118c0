//! CART trees (weighted Gini, unpruned by default) and a bagged random
//! forest with per-split feature sampling.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{self, Rng};
use crate::vectorize::{SparseMatrix, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `floor(sqrt(V))` of the `V` columns.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_cols: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_cols as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_cols.max(1),
            MaxFeatures::Count(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// Features drawn (without replacement) from those not constant in the
    /// node.
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

impl RfParams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_features: self.max_features,
            min_samples_split: self.min_samples_split,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    /// Weighted fraction of positive training mass.
    Leaf(f64),
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Fits on `samples` (row indices into `x`, repeats allowed).
    pub fn fit(
        params: &TreeParams,
        x: &SparseMatrix,
        labels: &[u8],
        weights: ClassWeights,
        samples: Vec<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("tree training sample"));
        }
        let mut builder = Builder::new(params, x, labels, weights);
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((at, rows, depth)) = stack.pop() {
            let (pos, neg) = builder.mass(&rows);
            let leaf = Node::Leaf(pos / (pos + neg));
            let can_split = pos > 0.0
                && neg > 0.0
                && rows.len() >= params.min_samples_split.max(2)
                && params.max_depth.is_none_or(|d| depth < d);
            let split = if can_split { builder.best_split(&rows, rng) } else { None };
            let Some((feature, threshold)) = split else {
                nodes[at] = leaf;
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x.row(i).get(feature) <= threshold);
            let l = nodes.len();
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[at] = Node::Split {
                feature: feature as u32,
                threshold,
                left: l as u32,
                right: l as u32 + 1,
            };
            stack.push((l + 1, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        Ok(DecisionTree {
            n_features: x.n_cols(),
            nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Positive fraction of the leaf reached by `row`.
    pub fn leaf_value(&self, row: SparseRow<'_>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row.get(feature as usize) <= threshold { left } else { right } as usize,
            }
        }
    }

    /// Majority label of the reached leaf; an exact tie counts as harmful.
    pub fn predict_label(&self, row: SparseRow<'_>) -> u8 {
        u8::from(self.leaf_value(row) >= 0.5)
    }
}

/// Scratch state for split search, sized to the column count and reused
/// across nodes.
struct Builder<'a> {
    params: &'a TreeParams,
    x: &'a SparseMatrix,
    labels: &'a [u8],
    weights: ClassWeights,
    count: Vec<u32>,
    min: Vec<f64>,
    max: Vec<f64>,
    slot: Vec<u32>,
    touched: Vec<usize>,
}

const NO_SLOT: u32 = u32::MAX;

fn gini_mass(pos: f64, neg: f64) -> f64 {
    let w = pos + neg;
    if w <= 0.0 {
        0.0
    } else {
        // w * (1 - p^2 - q^2)
        2.0 * pos * neg / w
    }
}

impl<'a> Builder<'a> {
    fn new(params: &'a TreeParams, x: &'a SparseMatrix, labels: &'a [u8], weights: ClassWeights) -> Self {
        let v = x.n_cols();
        Builder {
            params,
            x,
            labels,
            weights,
            count: vec![0; v],
            min: vec![0.0; v],
            max: vec![0.0; v],
            slot: vec![NO_SLOT; v],
            touched: Vec::new(),
        }
    }

    fn mass(&self, rows: &[usize]) -> (f64, f64) {
        let (mut pos, mut neg) = (0.0, 0.0);
        for &i in rows {
            if self.labels[i] == 1 {
                pos += self.weights.pos;
            } else {
                neg += self.weights.neg;
            }
        }
        (pos, neg)
    }

    /// Features whose value varies across `rows`, ascending.
    fn varying_features(&mut self, rows: &[usize]) -> Vec<usize> {
        for &i in rows {
            for (j, v) in self.x.row(i).iter() {
                if self.count[j] == 0 {
                    self.touched.push(j);
                    self.min[j] = v;
                    self.max[j] = v;
                } else {
                    self.min[j] = self.min[j].min(v);
                    self.max[j] = self.max[j].max(v);
                }
                self.count[j] += 1;
            }
        }
        let n = rows.len() as u32;
        let mut out: Vec<usize> = self
            .touched
            .iter()
            .copied()
            .filter(|&j| self.count[j] < n || self.min[j] != self.max[j])
            .collect();
        for &j in &self.touched {
            self.count[j] = 0;
        }
        self.touched.clear();
        out.sort_unstable();
        out
    }

    /// Best `(feature, threshold)` by weighted child Gini; ties go to the
    /// lower feature, then the lower threshold.
    fn best_split(&mut self, rows: &[usize], rng: &mut Rng) -> Option<(usize, f64)> {
        let varying = self.varying_features(rows);
        if varying.is_empty() {
            return None;
        }
        let m = self.params.max_features.resolve(self.x.n_cols()).min(varying.len());
        let mut candidates: Vec<usize> = if m == varying.len() {
            varying
        } else {
            index::sample(rng, varying.len(), m).into_iter().map(|k| varying[k]).collect()
        };
        candidates.sort_unstable();
        for (s, &j) in candidates.iter().enumerate() {
            self.slot[j] = s as u32;
        }
        // Nonzero (value, positive?, weight) per candidate.
        let mut values: Vec<Vec<(f64, bool, f64)>> = vec![Vec::new(); candidates.len()];
        for &i in rows {
            let y = self.labels[i] == 1;
            let w = self.weights.of(self.labels[i]);
            for (j, v) in self.x.row(i).iter() {
                let s = self.slot[j];
                if s != NO_SLOT {
                    values[s as usize].push((v, y, w));
                }
            }
        }
        for &j in &candidates {
            self.slot[j] = NO_SLOT;
        }
        let (pos, neg) = self.mass(rows);
        let mut best: Option<(f64, usize, f64)> = None;
        for (s, &j) in candidates.iter().enumerate() {
            let nz = &mut values[s];
            let (nz_pos, nz_neg) = nz.iter().fold((0.0, 0.0), |(p, n), &(_, y, w)| if y { (p + w, n) } else { (p, n + w) });
            let zero = (pos - nz_pos, neg - nz_neg);
            let has_zero = nz.len() < rows.len();
            nz.sort_by(|a, b| a.0.total_cmp(&b.0));
            // Distinct values ascending with their class mass, zeros merged in.
            let mut groups: Vec<(f64, f64, f64)> = Vec::with_capacity(nz.len() + 1);
            let mut zero_pending = has_zero;
            for &(v, y, w) in nz.iter() {
                if zero_pending && v > 0.0 {
                    groups.push((0.0, zero.0, zero.1));
                    zero_pending = false;
                }
                match groups.last_mut() {
                    Some(g) if g.0 == v => {
                        if y {
                            g.1 += w
                        } else {
                            g.2 += w
                        }
                    }
                    _ => groups.push((v, if y { w } else { 0.0 }, if y { 0.0 } else { w })),
                }
            }
            if zero_pending {
                groups.push((0.0, zero.0, zero.1));
            }
            let (mut lp, mut ln) = (0.0, 0.0);
            for k in 0..groups.len().saturating_sub(1) {
                lp += groups[k].1;
                ln += groups[k].2;
                let score = gini_mass(lp, ln) + gini_mass(pos - lp, neg - ln);
                let threshold = 0.5 * (groups[k].0 + groups[k + 1].0);
                // Midpoints of adjacent floats can round to the upper value.
                let threshold = if threshold >= groups[k + 1].0 { groups[k].0 } else { threshold };
                if best.is_none_or(|(b, _, _)| score < b) {
                    best = Some((score, j, threshold));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<DecisionTree>,
}

pub(crate) fn fit(p: &RfParams, x: &SparseMatrix, labels: &[u8], weights: ClassWeights, seed: u64, exec: Execution) -> Result<Forest> {
    let n = labels.len();
    let tree = p.tree();
    let trees = exec.map_range(p.n_trees, |t| {
        let mut rng = seed::rng_indexed(seed, "rf-tree", t as u64);
        let samples = if p.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        DecisionTree::fit(&tree, x, labels, weights, samples, &mut rng)
    });
    Ok(Forest {
        trees: trees.into_iter().collect::<Result<_>>()?,
    })
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Fraction of trees voting harmful.
    pub fn scores(&self, x: &SparseMatrix, exec: Execution) -> Result<Vec<f64>> {
        let v = self.trees.first().map_or(0, |t| t.n_features);
        if x.n_cols() != v {
            return Err(Error::DimensionMismatch(format!("RF trained on {v} features, got {}", x.n_cols())));
        }
        let n_trees = self.trees.len() as f64;
        Ok(exec.map_range(x.n_rows(), |i| {
            let row = x.row(i);
            self.trees.iter().map(|t| f64::from(t.predict_label(row))).sum::<f64>() / n_trees
        }))
    }
}
