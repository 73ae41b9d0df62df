//! Minimal compressed-sparse-row matrix used for operators on sector
//! functions.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self { n_rows, n_cols, indptr, indices, values }
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).filter(|&(k, _)| k == c).map(|(_, v)| v).sum()
    }

    /// `M f`.
    pub fn matvec(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n_cols);
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * f[c]).sum()).collect()
    }

    /// `π M` (row vector times matrix).
    pub fn vecmat(&self, pi: &[f64]) -> Vec<f64> {
        assert_eq!(pi.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for (r, &w) in pi.iter().enumerate() {
            if w != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += w * v;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            t.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        Self::from_triplets(self.n_cols, self.n_rows, t)
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::Input(format!(
                "shape mismatch: {}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut acc = vec![0.0; other.n_cols];
        let mut touched = Vec::new();
        let mut trip = Vec::new();
        for r in 0..self.n_rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if acc[c] == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = 0.0;
            }
            touched.clear();
        }
        Ok(Self::from_triplets(self.n_rows, other.n_cols, trip))
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> Result<f64> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::Input("shape mismatch in difference".into()));
        }
        let mut worst = 0.0f64;
        let mut dense = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                dense[c] += v;
            }
            for (c, v) in other.row(r) {
                dense[c] -= v;
            }
            for (c, _) in self.row(r).chain(other.row(r)) {
                worst = worst.max(dense[c].abs());
            }
            for (c, _) in self.row(r).chain(other.row(r)) {
                dense[c] = 0.0;
            }
        }
        Ok(worst)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.matvec(&[1.0, 2.0]), vec![6.0, -1.0]);
        assert_eq!(m.vecmat(&[1.0, 2.0]), vec![-2.0, 3.0]);
    }

    #[test]
    fn product_matches_dense() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = CsrMatrix::from_triplets(3, 2, vec![(0, 1, 4.0), (1, 0, 5.0), (2, 0, 6.0), (2, 1, 1.0)]);
        let p = a.mul(&b).unwrap();
        let d = a.to_dense() * b.to_dense();
        assert!((p.to_dense() - d).abs().max() < 1e-15);
        assert_eq!(p.max_abs_diff(&p).unwrap(), 0.0);
        assert!(a.mul(&a).is_err());
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }
}
