//! k-nearest-neighbour regression on standardized features.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor<T> {
    pub k: usize,
    x: Matrix<T>,
    y: Vec<T>,
}

impl<T: Real> KnnRegressor<T> {
    /// Caller guarantees `1 <= k <= x.nrows()`.
    pub(crate) fn new(k: usize, x: Matrix<T>, y: Vec<T>) -> Self {
        Self { k, x, y }
    }

    /// Indices of the `k` nearest training rows by Euclidean distance;
    /// equal distances go to the lower training index.
    pub fn neighbors(&self, query: &[T]) -> Vec<usize> {
        let mut dist: Vec<(T, usize)> = self
            .x
            .rows_iter()
            .enumerate()
            .map(|(i, row)| {
                let d: T = row.iter().zip(query).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
        let k = self.k.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, query: &[T]) -> T {
        let idx = self.neighbors(query);
        idx.iter().map(|&i| self.y[i]).sum::<T>() / T::count(idx.len())
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}
