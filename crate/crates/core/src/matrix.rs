//! Compressed sparse row/column storage used by the text and feature blocks.

use serde::{Deserialize, Serialize};

/// Row-major sparse matrix. Column indices within a row are strictly increasing
/// and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix { n_rows, n_cols, indptr: vec![0; n_rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Build from per-row `(column, value)` lists. Entries are sorted by column,
    /// duplicates are summed and zeros dropped.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n_cols, "column {c} out of range {n_cols}");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            // drop entries that ended up exactly zero
            let start = *indptr.last().unwrap();
            let mut w = start;
            for r in start..indices.len() {
                if values[r] != 0.0 {
                    indices[w] = indices[r];
                    values[w] = values[r];
                    w += 1;
                }
            }
            indices.truncate(w);
            values.truncate(w);
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows, n_cols, indptr, indices, values }
    }

    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Self {
        Self::from_rows(
            n_cols,
            rows.iter()
                .map(|r| {
                    assert_eq!(r.len(), n_cols);
                    r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(c, v)| (c, *v)).collect()
                })
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_dot(&self, i: usize, beta: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * beta[c]).sum()
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n_rows, other.n_rows, "row counts differ");
        let mut indptr = Vec::with_capacity(self.n_rows + 1);
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        indptr.push(0);
        for i in 0..self.n_rows {
            let (c, v) = self.row(i);
            indices.extend_from_slice(c);
            values.extend_from_slice(v);
            let (c, v) = other.row(i);
            indices.extend(c.iter().map(|&c| c + self.n_cols));
            values.extend_from_slice(v);
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols + other.n_cols, indptr, indices, values }
    }

    pub fn select_rows(&self, rows: &[usize]) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &i in rows {
            let (c, v) = self.row(i);
            indices.extend_from_slice(c);
            values.extend_from_slice(v);
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows: rows.len(), n_cols: self.n_cols, indptr, indices, values }
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let k = next[c];
                indices[k] = i;
                values[k] = v;
                next[c] += 1;
            }
        }
        CscMatrix { n_rows: self.n_rows, n_cols: self.n_cols, indptr, indices, values }
    }

    /// Dense column-major copy: element `(i, j)` at `j * n_rows + i`.
    pub fn to_dense_col_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c * self.n_rows + i] = v;
            }
        }
        out
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows)
            .map(|i| {
                let mut r = vec![0.0; self.n_cols];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    r[c] = v;
                }
                r
            })
            .collect()
    }
}

/// Column-major sparse matrix; row indices within a column are increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[j], self.indptr[j + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_sorts_merges_and_drops_zeros() {
        let m = CsrMatrix::from_rows(4, vec![vec![(3, 1.0), (0, 2.0), (3, 1.0)], vec![(1, 0.0)], vec![]]);
        assert_eq!(m.row(0), (&[0usize, 3][..], &[2.0, 2.0][..]));
        assert_eq!(m.row(1).0.len(), 0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn hstack_and_csc_agree_with_dense() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.0]], 2);
        let b = CsrMatrix::from_dense(&[vec![0.0, 3.0, 0.0], vec![4.0, 0.0, 5.0]], 3);
        let h = a.hstack(&b);
        assert_eq!(h.to_dense_rows(), vec![vec![1.0, 0.0, 0.0, 3.0, 0.0], vec![0.0, 2.0, 4.0, 0.0, 5.0]]);
        let csc = h.to_csc();
        assert_eq!(csc.col(2), (&[1usize][..], &[4.0][..]));
        assert_eq!(csc.col(0), (&[0usize][..], &[1.0][..]));
        let dense = h.to_dense_col_major();
        assert_eq!(dense[4 * 2 + 1], 5.0);
        assert_eq!(h.select_rows(&[1]).to_dense_rows(), vec![vec![0.0, 2.0, 4.0, 0.0, 5.0]]);
    }
}
