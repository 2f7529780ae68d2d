//! Dense row-major matrix and the least-squares solver used by the linear
//! regressor.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`. Panics on column mismatch.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Solves `min ||a x - b||` by Householder QR. Returns `None` when `a` is
/// numerically rank deficient.
pub fn least_squares<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n || b.len() != m {
        return None;
    }
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut diag_max = T::zero();

    for k in 0..n {
        let norm = (k..m).map(|i| r.get(i, k).powi(2)).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let alpha = if r.get(k, k) > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = (k..m).map(|i| r.get(i, k)).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| x.powi(2)).sum();
        if vnorm2 > T::zero() {
            for j in k..n {
                let dot: T = v.iter().enumerate().map(|(o, &vi)| vi * r.get(k + o, j)).sum();
                let f = T::lit(2.0) * dot / vnorm2;
                for (o, &vi) in v.iter().enumerate() {
                    let cur = r.get(k + o, j);
                    r.set(k + o, j, cur - f * vi);
                }
            }
            let dot: T = v.iter().enumerate().map(|(o, &vi)| vi * rhs[k + o]).sum();
            let f = T::lit(2.0) * dot / vnorm2;
            for (o, &vi) in v.iter().enumerate() {
                rhs[k + o] -= f * vi;
            }
        }
        diag_max = diag_max.max(r.get(k, k).abs());
    }

    let tol = diag_max * T::epsilon() * T::count(m.max(n)) * T::lit(10.0);
    if (0..n).any(|k| r.get(k, k).abs() <= tol) {
        return None;
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let s: T = (k + 1..n).map(|j| r.get(k, j) * x[j]).sum();
        x[k] = (rhs[k] - s) / r.get(k, k);
    }
    Some(x)
}
