//! Class-imbalance handling: inverse-frequency class weights and SMOTE.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed;

/// Per-class loss/vote multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub neg: f64,
    pub pos: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights { neg: 1.0, pos: 1.0 };

    pub fn new(neg: f64, pos: f64) -> Result<Self> {
        if !(neg > 0.0 && pos > 0.0 && neg.is_finite() && pos.is_finite()) {
            return Err(Error::InvalidArgument(format!("class weights must be positive, got {neg}, {pos}")));
        }
        Ok(ClassWeights { neg, pos })
    }

    pub fn of(&self, label: u8) -> f64 {
        if label == 1 {
            self.pos
        } else {
            self.neg
        }
    }

    pub fn sample_weights(&self, labels: &[u8]) -> Vec<f64> {
        labels.iter().map(|&y| self.of(y)).collect()
    }
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights::UNIT
    }
}

/// `w_c = N / (2 N_c)`, so that `sum_c w_c N_c = N`.
pub fn class_weights(labels: &[u8]) -> Result<ClassWeights> {
    let n = labels.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(ClassWeights {
        neg: n as f64 / (2.0 * n_neg as f64),
        pos: n as f64 / (2.0 * n_pos as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Minority count after synthesis; `None` means parity with the majority.
    pub target: Option<usize>,
    pub seed: u64,
}

impl SmoteConfig {
    pub fn resolve_target(&self, majority_count: usize) -> usize {
        self.target.unwrap_or(majority_count)
    }
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target: None,
            seed: 0,
        }
    }
}

/// `x + lambda * (neighbor - x)`.
pub fn interpolate(x: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    x.iter().zip(neighbor).map(|(a, b)| a + lambda * (b - a)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other rows of `rows[i]` (Euclidean, ties by index).
pub fn nearest_neighbors(rows: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, r)| (sq_dist(&rows[i], r), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

/// Generates `target - minority.len()` synthetic minority rows.
///
/// Base rows are visited round-robin; synthetic row `r` draws its neighbor
/// and interpolation factor from its own substream, so output does not
/// depend on the execution mode.
pub fn smote(minority: &[Vec<f64>], target: usize, cfg: &SmoteConfig, exec: Execution) -> Result<Vec<Vec<f64>>> {
    let n = minority.len();
    if n < 2 {
        return Err(Error::InvalidArgument("SMOTE needs at least 2 minority rows".into()));
    }
    if cfg.k_neighbors == 0 || cfg.k_neighbors >= n {
        return Err(Error::InvalidArgument(format!(
            "k_neighbors must be in 1..{n}, got {}",
            cfg.k_neighbors
        )));
    }
    if target < n {
        return Err(Error::InvalidArgument(format!("target {target} below minority count {n}")));
    }
    let dim = minority[0].len();
    if minority.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch("minority rows differ in length".into()));
    }

    let needed = target - n;
    let bases: Vec<usize> = (0..n.min(needed)).collect();
    let neighbors: Vec<Vec<usize>> = exec.map(&bases, |&i| nearest_neighbors(minority, i, cfg.k_neighbors));

    Ok(exec.map_range(needed, |r| {
        let i = r % n;
        let mut rng = seed::rng_indexed(cfg.seed, "smote", r as u64);
        let nn = neighbors[i][rng.random_range(0..cfg.k_neighbors)];
        let lambda: f64 = rng.random();
        interpolate(&minority[i], &minority[nn], lambda)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_class_counts() {
        let mut labels = vec![1u8; 913];
        labels.extend(std::iter::repeat_n(0u8, 11859));
        let w = class_weights(&labels).unwrap();
        assert!((w.pos - 12772.0 / 1826.0).abs() < 1e-12);
        assert!((w.pos - 6.9945).abs() < 1e-4);
        assert!((w.neg - 0.5385).abs() < 5e-5);
        assert!((w.pos * 913.0 + w.neg * 11859.0 - 12772.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_and_single_class() {
        assert_eq!(class_weights(&[0, 1, 1, 0]).unwrap(), ClassWeights::UNIT);
        assert!(matches!(class_weights(&[1, 1, 1]), Err(Error::SingleClass)));
        assert!(class_weights(&[]).is_err());
    }

    #[test]
    fn interpolation_endpoints() {
        let (x, y) = (vec![1.0, 2.0], vec![3.0, -2.0]);
        assert_eq!(interpolate(&x, &y, 0.0), x);
        assert_eq!(interpolate(&x, &y, 1.0), y);
    }

    #[test]
    fn smote_counts_and_preconditions() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let cfg = SmoteConfig { k_neighbors: 2, target: None, seed: 3 };
        let out = smote(&rows, 10, &cfg, Execution::Sequential).unwrap();
        assert_eq!(out.len(), 7);
        assert_eq!(out, smote(&rows, 10, &cfg, Execution::Parallel).unwrap());
        assert!(smote(&rows, 2, &cfg, Execution::Sequential).is_err());
        assert!(smote(&rows[..1], 4, &cfg, Execution::Sequential).is_err());
        let bad_k = SmoteConfig { k_neighbors: 3, ..cfg };
        assert!(smote(&rows, 4, &bad_k, Execution::Sequential).is_err());
        assert!(smote(&rows, 3, &cfg, Execution::Sequential).unwrap().is_empty());
    }

    #[test]
    fn neighbors_tie_break_by_index() {
        let rows = vec![vec![0.0], vec![1.0], vec![-1.0], vec![5.0]];
        assert_eq!(nearest_neighbors(&rows, 0, 2), vec![1, 2]);
    }
}
