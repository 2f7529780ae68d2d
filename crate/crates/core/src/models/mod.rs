//! The regressor roster: specification, fitting, evaluation and search.

mod artifact;
pub mod ensemble;
mod grid;
pub mod knn;
pub mod linear;
pub mod svr;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix};
use crate::ids::UnknownName;
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::trace::TraceError;

pub use artifact::{
    make_voting_ensemble, predict_velocity_profile, Metrics, ModelArtifact, ARTIFACT_FORMAT, ARTIFACT_VERSION,
};
pub use ensemble::{BoostedTrees, RandomForest};
pub use grid::{
    default_grid, describe_spec, grid_search, EvaluationEntry, EvaluationReport, GridPointOutcome, GridSearchResult,
    ParamGrid, EVALUATION_HEADER,
};
pub use knn::KnnRegressor;
pub use linear::LinearRegressor;
pub use svr::{LinearSvr, SvrParams};
pub use tree::{Growth, RegressionTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{family}: unknown hyperparameter `{key}`")]
    UnknownHyperparameter { family: ModelFamily, key: String },
    #[error("{family}: invalid hyperparameter `{key}`: {reason}")]
    InvalidHyperparameter {
        family: ModelFamily,
        key: String,
        reason: String,
    },
    #[error("design matrix is rank deficient; set a positive `ridge` hyperparameter to regularize")]
    Singular,
    #[error("k = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("length mismatch: {predictions} predictions vs {truth} truth values")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("voting ensemble: {0}")]
    Voting(String),
    #[error("grid search: {0}")]
    Grid(String),
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Linear,
    Knn,
    DecisionTree,
    RandomForest,
    GradientBoosted,
    GradientBoostedLeafwise,
    Svr,
    Voting,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 8] = [
        ModelFamily::Linear,
        ModelFamily::Knn,
        ModelFamily::DecisionTree,
        ModelFamily::RandomForest,
        ModelFamily::GradientBoosted,
        ModelFamily::GradientBoostedLeafwise,
        ModelFamily::Svr,
        ModelFamily::Voting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Linear => "linear",
            ModelFamily::Knn => "knn",
            ModelFamily::DecisionTree => "decision_tree",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::GradientBoosted => "gradient_boosted",
            ModelFamily::GradientBoostedLeafwise => "gradient_boosted_leafwise",
            ModelFamily::Svr => "svr",
            ModelFamily::Voting => "voting",
        }
    }

    fn allowed_keys(self) -> &'static [&'static str] {
        match self {
            ModelFamily::Linear => &["ridge"],
            ModelFamily::Knn => &["k"],
            ModelFamily::DecisionTree => &["max_depth", "min_samples_split", "min_samples_leaf"],
            ModelFamily::RandomForest => &["n_trees", "max_depth", "max_features", "min_samples_leaf", "bootstrap"],
            ModelFamily::GradientBoosted => &["n_stages", "learning_rate", "max_depth", "min_samples_leaf"],
            ModelFamily::GradientBoostedLeafwise => &[
                "n_stages",
                "learning_rate",
                "max_leaves",
                "max_depth",
                "min_samples_leaf",
            ],
            ModelFamily::Svr => &["epsilon", "c", "iterations", "step_size"],
            ModelFamily::Voting => &[],
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: "model family",
                name: s.to_string(),
            })
    }
}

/// A single hyperparameter value. `"none"` marks an unlimited setting such
/// as `max_depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Int(v.into())
    }
}

impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Int(v as i64)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

pub type Hyperparameters = BTreeMap<String, ParamValue>;

/// Renders hyperparameters as `key=value` pairs joined by `;`.
pub fn format_hyperparameters(h: &Hyperparameters) -> String {
    h.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
    /// Member specifications of a voting ensemble.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<ModelSpec>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        Self {
            family,
            hyperparameters: Hyperparameters::new(),
            seed: 0,
            members: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn voting(members: Vec<ModelSpec>) -> Self {
        Self {
            members,
            ..Self::new(ModelFamily::Voting)
        }
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ModelError {
        ModelError::InvalidHyperparameter {
            family: self.family,
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    fn int(&self, key: &str, default: usize, min: usize) -> Result<usize, ModelError> {
        match self.hyperparameters.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v >= min as i64 => Ok(*v as usize),
            Some(v) => Err(self.invalid(key, format!("expected an integer >= {min}, got {v}"))),
        }
    }

    fn optional_int(&self, key: &str, default: Option<usize>, min: usize) -> Result<Option<usize>, ModelError> {
        match self.hyperparameters.get(key) {
            None => Ok(default),
            Some(ParamValue::Text(s)) if s == "none" => Ok(None),
            Some(_) => self.int(key, 0, min).map(Some),
        }
    }

    fn float(&self, key: &str, default: f64, valid: impl Fn(f64) -> bool, expect: &str) -> Result<f64, ModelError> {
        let v = match self.hyperparameters.get(key) {
            None => return Ok(default),
            Some(ParamValue::Float(v)) => *v,
            Some(ParamValue::Int(v)) => *v as f64,
            Some(v) => return Err(self.invalid(key, format!("expected {expect}, got {v}"))),
        };
        if v.is_finite() && valid(v) {
            Ok(v)
        } else {
            Err(self.invalid(key, format!("expected {expect}, got {v}")))
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, ModelError> {
        match self.hyperparameters.get(key) {
            None => Ok(default),
            Some(ParamValue::Bool(b)) => Ok(*b),
            Some(v) => Err(self.invalid(key, format!("expected true or false, got {v}"))),
        }
    }

    /// Checks keys and value ranges and resolves defaults.
    pub fn resolve(&self, n_features: usize) -> Result<ResolvedParams, ModelError> {
        let allowed = self.family.allowed_keys();
        if let Some(key) = self.hyperparameters.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(ModelError::UnknownHyperparameter {
                family: self.family,
                key: key.clone(),
            });
        }
        let learning_rate = || self.float("learning_rate", 0.1, |v| v > 0.0 && v <= 1.0, "a value in (0, 1]");
        Ok(match self.family {
            ModelFamily::Linear => ResolvedParams::Linear {
                ridge: self.float("ridge", 0.0, |v| v >= 0.0, "a non-negative value")?,
            },
            ModelFamily::Knn => ResolvedParams::Knn {
                k: self.int("k", 5, 1)?,
            },
            ModelFamily::DecisionTree => ResolvedParams::Tree(TreeParams {
                max_depth: self.optional_int("max_depth", None, 1)?,
                min_samples_split: self.int("min_samples_split", 2, 2)?,
                min_samples_leaf: self.int("min_samples_leaf", 1, 1)?,
                ..TreeParams::default()
            }),
            ModelFamily::RandomForest => {
                let default_features = n_features.div_ceil(3).max(1);
                ResolvedParams::Forest {
                    n_trees: self.int("n_trees", 100, 1)?,
                    bootstrap: self.boolean("bootstrap", true)?,
                    tree: TreeParams {
                        max_depth: self.optional_int("max_depth", None, 1)?,
                        min_samples_leaf: self.int("min_samples_leaf", 1, 1)?,
                        max_features: Some(self.int("max_features", default_features, 1)?.min(n_features.max(1))),
                        ..TreeParams::default()
                    },
                }
            }
            ModelFamily::GradientBoosted => ResolvedParams::Boosted {
                n_stages: self.int("n_stages", 100, 0)?,
                learning_rate: learning_rate()?,
                tree: TreeParams {
                    max_depth: Some(self.int("max_depth", 3, 1)?),
                    min_samples_leaf: self.int("min_samples_leaf", 1, 1)?,
                    ..TreeParams::default()
                },
            },
            ModelFamily::GradientBoostedLeafwise => ResolvedParams::Boosted {
                n_stages: self.int("n_stages", 100, 0)?,
                learning_rate: learning_rate()?,
                tree: TreeParams {
                    max_leaves: Some(self.int("max_leaves", 31, 2)?),
                    max_depth: self.optional_int("max_depth", None, 1)?,
                    min_samples_leaf: self.int("min_samples_leaf", 1, 1)?,
                    growth: Growth::LeafWise,
                    ..TreeParams::default()
                },
            },
            ModelFamily::Svr => ResolvedParams::Svr {
                epsilon: self.float("epsilon", 0.01, |v| v >= 0.0, "a non-negative value")?,
                c: self.float("c", 1.0, |v| v > 0.0, "a positive value")?,
                iterations: self.int("iterations", 1000, 1)?,
                step_size: self.float("step_size", 0.1, |v| v > 0.0, "a positive value")?,
            },
            ModelFamily::Voting => {
                if self.members.len() < 2 {
                    return Err(ModelError::Voting(format!(
                        "needs at least 2 members, got {}",
                        self.members.len()
                    )));
                }
                ResolvedParams::Voting
            }
        })
    }
}

/// Hyperparameters after validation and defaulting.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedParams {
    Linear {
        ridge: f64,
    },
    Knn {
        k: usize,
    },
    Tree(TreeParams),
    Forest {
        n_trees: usize,
        bootstrap: bool,
        tree: TreeParams,
    },
    Boosted {
        n_stages: usize,
        learning_rate: f64,
        tree: TreeParams,
    },
    Svr {
        epsilon: f64,
        c: f64,
        iterations: usize,
        step_size: f64,
    },
    Voting,
}

/// Family-specific fitted state. Predictions are in the space the model
/// was trained in (log velocity for pipeline models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedModel<T> {
    Linear(LinearRegressor<T>),
    Knn(KnnRegressor<T>),
    DecisionTree(RegressionTree<T>),
    RandomForest(RandomForest<T>),
    GradientBoosted(BoostedTrees<T>),
    Svr(LinearSvr<T>),
    Voting(Vec<FittedModel<T>>),
}

impl<T: Real> FittedModel<T> {
    pub fn predict(&self, x: &Matrix<T>) -> Vec<T> {
        match self {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::DecisionTree(m) => m.predict(x),
            FittedModel::RandomForest(m) => m.predict(x),
            FittedModel::GradientBoosted(m) => m.predict(x),
            FittedModel::Svr(m) => m.predict(x),
            FittedModel::Voting(members) => voting_mean(members, x),
        }
    }
}

/// Arithmetic mean of member predictions, summed in member order.
fn voting_mean<T: Real>(members: &[FittedModel<T>], x: &Matrix<T>) -> Vec<T> {
    let mut acc = vec![T::zero(); x.nrows()];
    for m in members {
        for (a, p) in acc.iter_mut().zip(m.predict(x)) {
            *a += p;
        }
    }
    let count = T::count(members.len());
    acc.into_iter().map(|a| a / count).collect()
}

/// Fits one model on already-transformed inputs and targets.
pub fn fit_model<T: Real>(spec: &ModelSpec, data: &FeatureMatrix<T>) -> Result<FittedModel<T>, ModelError> {
    fit_xy(spec, &data.x, &data.y)
}

pub fn fit_xy<T: Real>(spec: &ModelSpec, x: &Matrix<T>, y: &[T]) -> Result<FittedModel<T>, ModelError> {
    if x.nrows() == 0 {
        return Err(ModelError::EmptyData);
    }
    if x.nrows() != y.len() {
        return Err(ModelError::Shape(format!("{} rows vs {} targets", x.nrows(), y.len())));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Shape("non-finite training data".into()));
    }
    Ok(match spec.resolve(x.ncols())? {
        ResolvedParams::Linear { ridge } => {
            FittedModel::Linear(LinearRegressor::fit(x, y, T::lit(ridge)).ok_or(ModelError::Singular)?)
        }
        ResolvedParams::Knn { k } => {
            if k > x.nrows() {
                return Err(ModelError::KTooLarge { k, rows: x.nrows() });
            }
            FittedModel::Knn(KnnRegressor::new(k, x.clone(), y.to_vec()))
        }
        ResolvedParams::Tree(params) => {
            let indices: Vec<usize> = (0..x.nrows()).collect();
            FittedModel::DecisionTree(RegressionTree::fit(x, y, &indices, &params, None))
        }
        ResolvedParams::Forest {
            n_trees,
            bootstrap,
            tree,
        } => FittedModel::RandomForest(RandomForest::fit(x, y, n_trees, bootstrap, &tree, spec.seed)),
        ResolvedParams::Boosted {
            n_stages,
            learning_rate,
            tree,
        } => FittedModel::GradientBoosted(BoostedTrees::fit(x, y, n_stages, T::lit(learning_rate), &tree)),
        ResolvedParams::Svr {
            epsilon,
            c,
            iterations,
            step_size,
        } => {
            let params = SvrParams {
                epsilon: T::lit(epsilon),
                c: T::lit(c),
                iterations,
                step_size: T::lit(step_size),
            };
            FittedModel::Svr(LinearSvr::fit(x, y, &params))
        }
        ResolvedParams::Voting => FittedModel::Voting(
            spec.members
                .iter()
                .map(|m| {
                    if m.family == ModelFamily::Voting {
                        Err(ModelError::Voting("nested voting ensembles are not supported".into()))
                    } else {
                        fit_xy(m, x, y)
                    }
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}

pub fn compute_rmse<T: Real>(predictions: &[T], truth: &[T]) -> Result<T, ModelError> {
    if predictions.len() != truth.len() {
        return Err(ModelError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(ModelError::EmptyData);
    }
    let sse: T = predictions.iter().zip(truth).map(|(&p, &t)| (p - t) * (p - t)).sum();
    Ok((sse / T::count(truth.len())).sqrt())
}
