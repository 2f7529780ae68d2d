//! Ordinary (optionally ridge) least squares with an intercept.

use serde::{Deserialize, Serialize};

use crate::linalg::{least_squares, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegressor<T> {
    pub intercept: T,
    pub coefficients: Vec<T>,
}

impl<T: Real> LinearRegressor<T> {
    /// Returns `None` for a rank-deficient design. A positive `ridge`
    /// penalises the slopes (not the intercept) by augmenting the design.
    pub fn fit(x: &Matrix<T>, y: &[T], ridge: T) -> Option<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        let extra = if ridge > T::zero() { p } else { 0 };
        let mut design = Matrix::zeros(n + extra, p + 1);
        let mut rhs = vec![T::zero(); n + extra];
        for i in 0..n {
            let row = design.row_mut(i);
            row[0] = T::one();
            row[1..].copy_from_slice(x.row(i));
            rhs[i] = y[i];
        }
        let penalty = ridge.sqrt();
        for j in 0..extra {
            design.set(n + j, j + 1, penalty);
        }
        let beta = least_squares(&design, &rhs)?;
        Some(Self {
            intercept: beta[0],
            coefficients: beta[1..].to_vec(),
        })
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        self.intercept + row.iter().zip(&self.coefficients).map(|(&a, &b)| a * b).sum::<T>()
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}
