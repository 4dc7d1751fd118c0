use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-compressed sparse matrix. Column indices are strictly increasing
/// within a row and no explicit zeros are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    #[serde(with = "crate::blob::f64s")]
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * dense[j]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Value at column `j` (0 when not stored).
    pub fn get(&self, j: usize) -> f64 {
        match self.indices.binary_search(&(j as u32)) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    /// Sparse-sparse dot product by merge.
    pub fn dot(&self, other: &SparseRow<'_>) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut d = vec![0.0; n_cols];
        for (j, v) in self.iter() {
            d[j] = v;
        }
        d
    }
}

impl SparseMatrix {
    pub fn new(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_>> {
        (0..self.n_rows()).map(|i| self.row(i))
    }

    /// Appends a row given `(column, value)` pairs sorted by column; zeros are dropped.
    pub fn push_row(&mut self, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let start = self.indices.len();
        let mut last: Option<usize> = None;
        for (j, v) in pairs {
            if j >= self.n_cols || last.is_some_and(|l| j <= l) {
                self.indices.truncate(start);
                self.values.truncate(start);
                return Err(Error::InvalidArgument(format!(
                    "row columns must be strictly increasing and < {}, got {j}",
                    self.n_cols
                )));
            }
            last = Some(j);
            if v != 0.0 {
                self.indices.push(j as u32);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn push_dense_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "dense row of length {} for {} columns",
                row.len(),
                self.n_cols
            )));
        }
        self.push_row(row.iter().copied().enumerate())
    }

    pub fn from_dense(n_cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = SparseMatrix::new(n_cols);
        for r in rows {
            m.push_dense_row(r)?;
        }
        Ok(m)
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut m = SparseMatrix::new(self.n_cols);
        for &i in rows {
            let r = self.row(i);
            m.indices.extend_from_slice(r.indices);
            m.values.extend_from_slice(r.values);
            m.indptr.push(m.indices.len());
        }
        m
    }

    pub fn append(&mut self, other: &SparseMatrix) -> Result<()> {
        if other.n_cols != self.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "appending {} columns to {}",
                other.n_cols, self.n_cols
            )));
        }
        for r in other.rows() {
            self.indices.extend_from_slice(r.indices);
            self.values.extend_from_slice(r.values);
            self.indptr.push(self.indices.len());
        }
        Ok(())
    }

    pub fn l2_normalize_rows(&mut self) {
        for i in 0..self.n_rows() {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            let norm = self.values[a..b].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                self.values[a..b].iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    pub(crate) fn raw_parts(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.indptr, &self.indices, &self.values)
    }

    pub(crate) fn from_raw_parts(n_cols: usize, indptr: Vec<usize>, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        let ok = !indptr.is_empty()
            && indptr[0] == 0
            && *indptr.last().unwrap() == indices.len()
            && indices.len() == values.len()
            && indptr.windows(2).all(|w| w[0] <= w[1])
            && indptr.windows(2).all(|w| {
                let row = &indices[w[0]..w[1]];
                row.windows(2).all(|p| p[0] < p[1]) && row.iter().all(|&j| (j as usize) < n_cols)
            })
            && values.iter().all(|&v| v != 0.0);
        if !ok {
            return Err(Error::InvalidArgument("inconsistent sparse matrix layout".into()));
        }
        Ok(SparseMatrix {
            n_cols,
            indptr,
            indices,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_drops_zeros_and_checks_order() {
        let mut m = SparseMatrix::new(4);
        m.push_row([(0, 1.0), (2, 0.0), (3, 2.0)]).unwrap();
        assert_eq!(m.row(0).indices, &[0, 3]);
        assert!(m.push_row([(2, 1.0), (1, 1.0)]).is_err());
        assert!(m.push_row([(4, 1.0)]).is_err());
        assert_eq!(m.n_rows(), 1);
        m.push_row([]).unwrap();
        assert_eq!(m.row(1).nnz(), 0);
    }

    #[test]
    fn dots() {
        let m = SparseMatrix::from_dense(3, &[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]).unwrap();
        assert_eq!(m.row(0).dot(&m.row(1)), 8.0);
        assert_eq!(m.row(1).dot_dense(&[1.0, 1.0, 1.0]), 7.0);
        assert_eq!(m.row(1).get(1), 3.0);
        assert_eq!(m.row(1).get(0), 0.0);
        let s = m.select_rows(&[1, 0]);
        assert_eq!(s.row(0).to_dense(3), vec![0.0, 3.0, 4.0]);
    }
}
