//! Coordinate-format sparse matrices.
//!
//! JSON form: `{"rows": R, "cols": C, "coo": [[i, j, v], ...]}` with entries
//! sorted by `(i, j)` and no duplicates.

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub coo: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Builds from arbitrary-order triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= rows || j >= cols) {
            return Err(Error::Shape(format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut coo: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match coo.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => coo.push((i, j, v)),
            }
        }
        coo.retain(|e| e.2 != 0.0);
        Ok(SparseMatrix { rows, cols, coo })
    }

    pub fn nnz(&self) -> usize {
        self.coo.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coo
            .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
            .map(|k| self.coo[k].2)
            .unwrap_or(0.0)
    }

    /// Checks bounds, ordering and uniqueness.
    pub fn validate(&self) -> Result<()> {
        for w in self.coo.windows(2) {
            if (w[0].0, w[0].1) >= (w[1].0, w[1].1) {
                return Err(Error::Shape(format!(
                    "coo entries not strictly sorted at ({}, {})",
                    w[1].0, w[1].1
                )));
            }
        }
        if let Some(&(i, j, _)) = self.coo.iter().find(|&&(i, j, _)| i >= self.rows || j >= self.cols) {
            return Err(Error::Shape(format!("entry ({i}, {j}) outside {}x{}", self.rows, self.cols)));
        }
        Ok(())
    }

    /// Entries of row `i` as a slice of the sorted triplets.
    pub fn row(&self, i: usize) -> &[(usize, usize, f64)] {
        let start = self.coo.partition_point(|e| e.0 < i);
        let end = self.coo.partition_point(|e| e.0 <= i);
        &self.coo[start..end]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.rows];
        for &(i, _, v) in &self.coo {
            sums[i] += v;
        }
        sums
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.coo {
            m[(i, j)] = v;
        }
        m
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut coo = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    coo.push((i, j, v));
                }
            }
        }
        SparseMatrix {
            rows: m.rows(),
            cols: m.cols(),
            coo,
        }
    }

    /// `self · dense`.
    pub fn matmul_dense(&self, dense: &Matrix) -> Result<Matrix> {
        if self.cols != dense.rows() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                dense.rows(),
                dense.cols()
            )));
        }
        let width = dense.cols();
        let mut out = Matrix::zeros(self.rows, width);
        crate::par::fill_rows(out.as_mut_slice(), width, |i, row| {
            for &(_, k, v) in self.row(i) {
                for (o, x) in row.iter_mut().zip(dense.row(k)) {
                    *o += v * x;
                }
            }
        });
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sparse matrices always serialize")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let m: SparseMatrix = serde_json::from_str(src).map_err(|e| Error::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }
}
