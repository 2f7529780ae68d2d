//! Brute-force reference implementations, written independently of the
//! library code they check.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Rows, Vec<f64>) {
    let x = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    (x, y)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean target of the k rows nearest to `q`, ordering by squared distance
/// and then by row index.
pub fn knn_oracle(x: &Rows, y: &[f64], k: usize, q: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> = x
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[..k].iter().map(|&(_, i)| y[i]).sum::<f64>() / k as f64
}

/// Solves (AᵀA)β = Aᵀy with an intercept column by Gaussian elimination
/// with partial pivoting. Returns `[intercept, coefficients...]`.
pub fn normal_equations(x: &Rows, y: &[f64]) -> Vec<f64> {
    let p = x[0].len() + 1;
    let design: Rows = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut m = vec![vec![0.0; p + 1]; p];
    for (row, &t) in design.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                m[i][j] += row[i] * row[j];
            }
            m[i][p] += row[i] * t;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        for r in 0..p {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=p {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    (0..p).map(|i| m[i][p] / m[i][i]).collect()
}

pub fn linear_predict(beta: &[f64], q: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(q).map(|(b, v)| b * v).sum::<f64>()
}

fn mean(idx: &[usize], y: &[f64]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn sse(idx: &[usize], y: &[f64]) -> f64 {
    let m = mean(idx, y);
    idx.iter().map(|&i| (y[i] - m).powi(2)).sum()
}

#[derive(Debug, Clone)]
pub enum OracleTree {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

impl OracleTree {
    pub fn predict(&self, q: &[f64]) -> f64 {
        match self {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if q[*feature] <= *threshold {
                    left.predict(q)
                } else {
                    right.predict(q)
                }
            }
        }
    }
}

/// Enumerates every midpoint between distinct sorted values of every
/// feature and keeps the split with the smallest total squared error.
/// Improvements below `1e-12·Σy²` count as ties and keep the earlier
/// candidate.
pub fn best_split_oracle(x: &Rows, y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let scale: f64 = idx.iter().map(|&i| y[i] * y[i]).sum::<f64>().max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    let parent = sse(idx, y);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let t = if t >= w[1] { w[0] } else { t };
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
            let s = sse(&l, y) + sse(&r, y);
            if best.is_none_or(|b| s < b.2 - tol) {
                best = Some((f, t, s));
            }
        }
    }
    let (f, t, s) = best?;
    (s < parent - tol).then_some((f, t))
}

pub fn tree_oracle(x: &Rows, y: &[f64], idx: &[usize], depth: usize) -> OracleTree {
    if depth == 0 || idx.len() < 2 {
        return OracleTree::Leaf(mean(idx, y));
    }
    match best_split_oracle(x, y, idx) {
        None => OracleTree::Leaf(mean(idx, y)),
        Some((feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
            OracleTree::Split {
                feature,
                threshold,
                left: Box::new(tree_oracle(x, y, &l, depth - 1)),
                right: Box::new(tree_oracle(x, y, &r, depth - 1)),
            }
        }
    }
}

/// Least-squares boosting: start from the mean and add `lr` times a tree
/// fitted to the current residuals, stage by stage.
pub struct BoostOracle {
    pub init: f64,
    pub lr: f64,
    pub trees: Vec<OracleTree>,
}

impl BoostOracle {
    pub fn fit(x: &Rows, y: &[f64], stages: usize, lr: f64, depth: usize) -> Self {
        let idx: Vec<usize> = (0..y.len()).collect();
        let init = y.iter().sum::<f64>() / y.len() as f64;
        let mut f = vec![init; y.len()];
        let mut trees = Vec::new();
        for _ in 0..stages {
            let r: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
            let t = tree_oracle(x, &r, &idx, depth);
            for (fi, row) in f.iter_mut().zip(x) {
                *fi += lr * t.predict(row);
            }
            trees.push(t);
        }
        Self { init, lr, trees }
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        self.trees.iter().fold(self.init, |acc, t| acc + self.lr * t.predict(q))
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}
