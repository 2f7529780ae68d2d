//! Linear epsilon-insensitive support vector regression trained by
//! full-batch subgradient descent.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams<T> {
    pub epsilon: T,
    pub c: T,
    pub iterations: usize,
    pub step_size: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvr<T> {
    pub weights: Vec<T>,
    pub bias: T,
}

impl<T: Real> LinearSvr<T> {
    /// Minimises `lambda/2 |w|^2 + mean(max(0, |y - w.x - b| - eps))` with
    /// `lambda = 1 / (C n)`, step `step_size / sqrt(t + 1)`, keeping the
    /// iterate with the lowest objective.
    pub fn fit(x: &Matrix<T>, y: &[T], params: &SvrParams<T>) -> Self {
        let (n, p) = (x.nrows(), x.ncols());
        let n_t = T::count(n);
        let lambda = T::one() / (params.c * n_t);
        let mut w = vec![T::zero(); p];
        let mut b = T::zero();
        let mut best = (Self::objective(x, y, &w, b, lambda, params.epsilon), w.clone(), b);

        for t in 0..params.iterations {
            let mut gw: Vec<T> = w.iter().map(|&wi| lambda * wi).collect();
            let mut gb = T::zero();
            for (row, &target) in x.rows_iter().zip(y) {
                let r = target - dot(row, &w) - b;
                if r.abs() > params.epsilon {
                    let s = r.signum() / n_t;
                    for (g, &xi) in gw.iter_mut().zip(row) {
                        *g -= s * xi;
                    }
                    gb -= s;
                }
            }
            let eta = params.step_size / T::count(t + 1).sqrt();
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= eta * *g;
            }
            b -= eta * gb;
            let obj = Self::objective(x, y, &w, b, lambda, params.epsilon);
            if obj < best.0 {
                best = (obj, w.clone(), b);
            }
        }
        Self {
            weights: best.1,
            bias: best.2,
        }
    }

    fn objective(x: &Matrix<T>, y: &[T], w: &[T], b: T, lambda: T, eps: T) -> T {
        let loss: T = x
            .rows_iter()
            .zip(y)
            .map(|(row, &t)| ((t - dot(row, w) - b).abs() - eps).max(T::zero()))
            .sum();
        lambda / T::lit(2.0) * dot(w, w) + loss / T::count(y.len().max(1))
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        dot(row, &self.weights) + self.bias
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
