//! CART regression trees: binary splits minimising within-leaf squared
//! error, grown either level by level or best-first by leaf.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    DepthWise,
    LeafWise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    /// Only consulted for leaf-wise growth.
    pub max_leaves: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
    pub growth: Growth,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            max_leaves: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            growth: Growth::DepthWise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    nodes: Vec<Node<T>>,
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    gain: T,
}

struct Pending<T> {
    node: usize,
    indices: Vec<usize>,
    depth: usize,
    split: Option<SplitChoice<T>>,
}

impl<T: Real> RegressionTree<T> {
    /// Fits on the rows named by `indices` (duplicates allowed, as in a
    /// bootstrap sample). `rng` is required only when `max_features` is
    /// smaller than the feature count.
    pub fn fit(
        x: &Matrix<T>,
        y: &[T],
        indices: &[usize],
        params: &TreeParams,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let mut builder = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
        };
        let root = builder.new_leaf(indices);
        let mut pending = vec![Pending {
            node: root,
            indices: indices.to_vec(),
            depth: 0,
            split: None,
        }];
        match params.growth {
            Growth::DepthWise => {
                while let Some(mut p) = pending.pop() {
                    p.split = builder.best_split(&p, rng.as_deref_mut());
                    if let Some((l, r)) = builder.apply(&p) {
                        // Right pushed first so the left subtree is built first.
                        pending.push(r);
                        pending.push(l);
                    }
                }
            }
            Growth::LeafWise => {
                let max_leaves = params.max_leaves.unwrap_or(usize::MAX).max(1);
                let mut leaves = 1;
                for p in pending.iter_mut() {
                    p.split = builder.best_split(p, rng.as_deref_mut());
                }
                while leaves < max_leaves {
                    let best = pending
                        .iter()
                        .enumerate()
                        .filter_map(|(i, p)| p.split.map(|s| (i, s.gain, p.node)))
                        .fold(None::<(usize, T, usize)>, |acc, cur| match acc {
                            Some(a) if a.1 > cur.1 || (a.1 == cur.1 && a.2 < cur.2) => Some(a),
                            _ => Some(cur),
                        });
                    let Some((i, _, _)) = best else { break };
                    let p = pending.swap_remove(i);
                    let (mut l, mut r) = builder.apply(&p).expect("candidate has a split");
                    l.split = builder.best_split(&l, rng.as_deref_mut());
                    r.split = builder.best_split(&r, rng.as_deref_mut());
                    pending.push(l);
                    pending.push(r);
                    leaves += 1;
                }
            }
        }
        Self { nodes: builder.nodes }
    }

    pub fn predict_row(&self, row: &[T]) -> T {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        x.rows_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }
}

struct Builder<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
    params: &'a TreeParams,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Builder<'_, T> {
    fn new_leaf(&mut self, indices: &[usize]) -> usize {
        let sum: T = indices.iter().map(|&i| self.y[i]).sum();
        let value = if indices.is_empty() {
            T::zero()
        } else {
            sum / T::count(indices.len())
        };
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn candidate_features(&self, rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let p = self.x.ncols();
        let k = self.params.max_features.unwrap_or(p).clamp(1, p.max(1));
        if k >= p {
            return (0..p).collect();
        }
        let rng = rng.expect("feature subsampling needs an rng");
        let mut pool: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = rng.random_range(i..p);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }

    fn best_split(&self, p: &Pending<T>, rng: Option<&mut ChaCha8Rng>) -> Option<SplitChoice<T>> {
        let n = p.indices.len();
        let params = self.params;
        if n < params.min_samples_split.max(2) || n < 2 * params.min_samples_leaf.max(1) {
            return None;
        }
        if params.max_depth.is_some_and(|d| p.depth >= d) {
            return None;
        }
        let features = self.candidate_features(rng);
        let total: T = p.indices.iter().map(|&i| self.y[i]).sum();
        let sum_sq: T = p.indices.iter().map(|&i| self.y[i].powi(2)).sum();
        let n_t = T::count(n);
        let parent_score = total * total / n_t;
        let min_leaf = params.min_samples_leaf.max(1);
        // Scores closer than accumulated rounding count as ties; the earliest
        // feature and threshold win.
        let tie = T::epsilon() * T::count(4 * n);

        let mut best: Option<(usize, T, T)> = None;
        let mut order = p.indices.clone();
        for &f in &features {
            order.sort_by(|&a, &b| {
                self.x
                    .get(a, f)
                    .partial_cmp(&self.x.get(b, f))
                    .expect("finite features")
            });
            let mut left_sum = T::zero();
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let (lo, hi) = (self.x.get(order[k], f), self.x.get(order[k + 1], f));
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / T::count(n_left) + right_sum * right_sum / T::count(n - n_left);
                if best.is_none_or(|b| score > b.2 + b.2.abs() * tie) {
                    let mut threshold = lo + (hi - lo) / T::lit(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, score));
                }
            }
        }
        let (feature, threshold, score) = best?;
        let gain = score - parent_score;
        let tol = T::epsilon() * T::lit(4.0) * sum_sq;
        (gain > tol).then_some(SplitChoice {
            feature,
            threshold,
            gain,
        })
    }

    fn apply(&mut self, p: &Pending<T>) -> Option<(Pending<T>, Pending<T>)> {
        let s = p.split?;
        let (left, right): (Vec<usize>, Vec<usize>) = p
            .indices
            .iter()
            .partition(|&&i| self.x.get(i, s.feature) <= s.threshold);
        let l = self.new_leaf(&left);
        let r = self.new_leaf(&right);
        self.nodes[p.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left: l,
            right: r,
        };
        Some((
            Pending {
                node: l,
                indices: left,
                depth: p.depth + 1,
                split: None,
            },
            Pending {
                node: r,
                indices: right,
                depth: p.depth + 1,
                split: None,
            },
        ))
    }
}
