//! Bagged random forests and stagewise least-squares boosting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<T> {
    trees: Vec<RegressionTree<T>>,
}

impl<T: Real> RandomForest<T> {
    /// Tree `i` draws from its own ChaCha stream `i` under `seed`, so the
    /// result does not depend on how trees are scheduled across threads.
    pub fn fit(x: &Matrix<T>, y: &[T], n_trees: usize, bootstrap: bool, params: &TreeParams, seed: u64) -> Self {
        let n = x.nrows();
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let indices: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, y, &indices, params, Some(&mut rng))
            })
            .collect();
        Self { trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        let sum: T = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / T::count(self.trees.len())
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees<T> {
    pub init: T,
    pub learning_rate: T,
    trees: Vec<RegressionTree<T>>,
}

impl<T: Real> BoostedTrees<T> {
    /// Starts from the target mean and fits each stage's tree to the
    /// current residuals, adding it with shrinkage `learning_rate`.
    pub fn fit(x: &Matrix<T>, y: &[T], n_stages: usize, learning_rate: T, params: &TreeParams) -> Self {
        let n = x.nrows();
        let init = if n == 0 {
            T::zero()
        } else {
            y.iter().copied().sum::<T>() / T::count(n)
        };
        let indices: Vec<usize> = (0..n).collect();
        let mut current = vec![init; n];
        let mut trees = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            let residual: Vec<T> = y.iter().zip(&current).map(|(&t, &f)| t - f).collect();
            let tree = RegressionTree::fit(x, &residual, &indices, params, None);
            for (f, row) in current.iter_mut().zip(x.rows_iter()) {
                *f += learning_rate * tree.predict_row(row);
            }
            trees.push(tree);
        }
        Self {
            init,
            learning_rate,
            trees,
        }
    }

    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }

    /// Prediction using only the first `stages` trees.
    pub fn predict_row_staged(&self, row: &[T], stages: usize) -> T {
        let mut f = self.init;
        for tree in self.trees.iter().take(stages) {
            f += self.learning_rate * tree.predict_row(row);
        }
        f
    }

    pub fn predict_staged(&self, x: &Matrix<T>, stages: usize) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row_staged(r, stages)).collect()
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        self.predict_staged(x, self.trees.len())
    }
}
