use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_rmse, fit_model, format_hyperparameters, ModelError, ModelFamily, ModelSpec, ParamValue};
use crate::features::{FeatureMatrix, FeatureTransform};
use crate::scalar::Real;

/// Candidate values per hyperparameter. Points are enumerated as a
/// Cartesian product over keys in sorted order, the last key varying
/// fastest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid(pub BTreeMap<String, Vec<ParamValue>>);

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, values: Vec<ParamValue>) -> Self {
        self.0.insert(key.to_string(), values);
        self
    }

    pub fn points(&self) -> Vec<BTreeMap<String, ParamValue>> {
        let mut points = vec![BTreeMap::new()];
        for (key, values) in &self.0 {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(key.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        points
    }
}

fn ints(values: impl IntoIterator<Item = i64>) -> Vec<ParamValue> {
    values.into_iter().map(ParamValue::Int).collect()
}

fn floats(values: &[f64]) -> Vec<ParamValue> {
    values.iter().map(|&v| ParamValue::Float(v)).collect()
}

/// Small exhaustive grids per family.
pub fn default_grid(family: ModelFamily) -> ParamGrid {
    match family {
        ModelFamily::Knn => ParamGrid::new().with("k", ints(1..=15)),
        ModelFamily::RandomForest => ParamGrid::new().with("n_trees", ints([50, 100, 200])).with(
            "max_depth",
            vec![ParamValue::Int(4), ParamValue::Int(8), ParamValue::from("none")],
        ),
        ModelFamily::GradientBoosted => ParamGrid::new()
            .with("n_stages", ints([100, 300]))
            .with("learning_rate", floats(&[0.05, 0.1]))
            .with("max_depth", ints([2, 3])),
        ModelFamily::GradientBoostedLeafwise => ParamGrid::new()
            .with("n_stages", ints([100, 300]))
            .with("learning_rate", floats(&[0.05, 0.1]))
            .with("max_leaves", ints([15, 31])),
        ModelFamily::Svr => ParamGrid::new().with("c", floats(&[0.1, 1.0, 10.0])),
        ModelFamily::DecisionTree => ParamGrid::new().with(
            "max_depth",
            vec![ParamValue::Int(4), ParamValue::Int(8), ParamValue::from("none")],
        ),
        ModelFamily::Linear | ModelFamily::Voting => ParamGrid::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPointOutcome<T> {
    pub spec: ModelSpec,
    pub validation_rmse: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult<T> {
    pub best: ModelSpec,
    pub validation_rmse: T,
    pub outcomes: Vec<GridPointOutcome<T>>,
}

/// Fits every grid point on `train` and scores it on `validation` by RMSE
/// in m/s. Points whose fit fails are skipped with a warning; the lowest
/// RMSE wins and ties go to the earlier point.
pub fn grid_search<T: Real>(
    family: ModelFamily,
    grid: &ParamGrid,
    train: &FeatureMatrix<T>,
    validation: &FeatureMatrix<T>,
    transform: &FeatureTransform<T>,
    seed: u64,
) -> Result<GridSearchResult<T>, ModelError> {
    if family == ModelFamily::Voting {
        return Err(ModelError::Grid(
            "voting ensembles are assembled from tuned members, not searched".into(),
        ));
    }
    if let Some((key, _)) = grid.0.iter().find(|(_, v)| v.is_empty()) {
        return Err(ModelError::Grid(format!("no candidate values for `{key}`")));
    }
    let specs: Vec<ModelSpec> = grid
        .points()
        .into_iter()
        .map(|hyperparameters| ModelSpec {
            family,
            hyperparameters,
            seed,
            members: Vec::new(),
        })
        .collect();

    let outcomes: Vec<GridPointOutcome<T>> = specs
        .into_par_iter()
        .map(|spec| {
            let scored = fit_model(&spec, train).and_then(|m| {
                let pred = transform.inverse_target(&m.predict(&validation.x));
                compute_rmse(&pred, &validation.velocity)
            });
            match scored {
                Ok(rmse) => GridPointOutcome {
                    spec,
                    validation_rmse: Some(rmse),
                    error: None,
                },
                Err(e) => {
                    log::warn!(
                        "{family} grid point {} disqualified: {e}",
                        format_hyperparameters(&spec.hyperparameters)
                    );
                    GridPointOutcome {
                        spec,
                        validation_rmse: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let mut best: Option<(usize, T)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(r) = o.validation_rmse {
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((i, r));
            }
        }
    }
    let (i, validation_rmse) = best.ok_or_else(|| ModelError::Grid(format!("every {family} grid point failed")))?;
    Ok(GridSearchResult {
        best: outcomes[i].spec.clone(),
        validation_rmse,
        outcomes,
    })
}

/// One line of the model comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationEntry<T> {
    pub model: String,
    pub family: ModelFamily,
    pub rmse: T,
    pub hyperparameters: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport<T> {
    pub entries: Vec<EvaluationEntry<T>>,
}

pub const EVALUATION_HEADER: &str = "model,family,rmse_m_per_s,hyperparameters";

pub fn describe_spec(spec: &ModelSpec) -> String {
    if spec.family == ModelFamily::Voting {
        let members: Vec<&str> = spec.members.iter().map(|m| m.family.as_str()).collect();
        format!("members={}", members.join("+"))
    } else {
        format_hyperparameters(&spec.hyperparameters)
    }
}

impl<T: Real> EvaluationReport<T> {
    /// Rows ordered from highest to lowest RMSE, ties by model name.
    pub fn to_csv_string(&self) -> String {
        let mut rows: Vec<&EvaluationEntry<T>> = self.entries.iter().collect();
        rows.sort_by(|a, b| {
            b.rmse
                .partial_cmp(&a.rmse)
                .expect("finite rmse")
                .then(a.model.cmp(&b.model))
        });
        let mut out = String::from(EVALUATION_HEADER);
        out.push('\n');
        for e in rows {
            writeln!(out, "{},{},{},{}", e.model, e.family, e.rmse, e.hyperparameters).expect("string write");
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        if lines.next() != Some(EVALUATION_HEADER) {
            return Err(ModelError::Artifact("evaluation table header mismatch".into()));
        }
        let entries = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let cells: Vec<&str> = line.splitn(4, ',').collect();
                let bad = || ModelError::Artifact(format!("malformed evaluation row `{line}`"));
                if cells.len() != 4 {
                    return Err(bad());
                }
                Ok(EvaluationEntry {
                    model: cells[0].to_string(),
                    family: cells[1].parse().map_err(|_| bad())?,
                    rmse: cells[2].parse().map_err(|_| bad())?,
                    hyperparameters: cells[3].to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    /// Names of the `n` models with the lowest RMSE, best first.
    pub fn top(&self, n: usize) -> Vec<String> {
        let mut rows: Vec<&EvaluationEntry<T>> = self.entries.iter().collect();
        rows.sort_by(|a, b| {
            a.rmse
                .partial_cmp(&b.rmse)
                .expect("finite rmse")
                .then(a.model.cmp(&b.model))
        });
        rows.into_iter().take(n).map(|e| e.model.clone()).collect()
    }
}
