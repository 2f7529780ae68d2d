//! Categorical encoding, standardization, target log-transform and the
//! train/validation/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::ids::{CaseId, VesselId};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Number of model inputs: time, vessel code, case code, heart rate.
pub const N_FEATURES: usize = 4;
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["time_s", "vessel", "case", "heart_rate_bpm"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("unseen category `{category}` in column `{column}`")]
    UnseenCategory { column: String, category: String },
    #[error("scaler parameters required for {0:?} mode")]
    MissingScaler(ScaleMode),
    #[error("scaler has {expected} columns, matrix has {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("log transform undefined for velocity {0} (< -1)")]
    LogDomain(f64),
    #[error("split needs at least 3 rows, found {0}")]
    TooFewRows(usize),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("split index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("non-finite feature value produced")]
    NonFinite,
}

/// Integer codes for one categorical column, assigned in lexicographic
/// order of the distinct names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub column: String,
    pub categories: Vec<String>,
}

impl EncodingMap {
    pub fn code(&self, name: &str) -> Result<usize, FeatureError> {
        self.categories
            .binary_search_by(|c| c.as_str().cmp(name))
            .map_err(|_| FeatureError::UnseenCategory {
                column: self.column.clone(),
                category: name.to_string(),
            })
    }

    pub fn name(&self, code: usize) -> Option<&str> {
        self.categories.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

pub fn label_encode<S: AsRef<str>>(values: &[S], column: &str) -> (Vec<usize>, EncodingMap) {
    let mut categories: Vec<String> = values.iter().map(|v| v.as_ref().to_string()).collect();
    categories.sort();
    categories.dedup();
    let map = EncodingMap {
        column: column.to_string(),
        categories,
    };
    let codes = values
        .iter()
        .map(|v| map.code(v.as_ref()).expect("every value is in its own map"))
        .collect();
    (codes, map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale<T> {
    pub mean: T,
    pub std: T,
    /// Zero-variance column passed through unscaled.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams<T> {
    pub columns: Vec<ColumnScale<T>>,
}

impl<T: Real> ScalerParams<T> {
    /// Per-column mean and population standard deviation.
    pub fn fit(matrix: &Matrix<T>) -> Self {
        let n = T::count(matrix.nrows().max(1));
        let columns = (0..matrix.ncols())
            .map(|j| {
                let col = matrix.column(j);
                let mean = col.iter().copied().sum::<T>() / n;
                let var = col.iter().map(|&x| (x - mean).powi(2)).sum::<T>() / n;
                let std = var.sqrt();
                let constant = !(std > T::zero());
                if constant {
                    log::warn!("feature column {j} has zero variance; passing it through unscaled");
                }
                ColumnScale { mean, std, constant }
            })
            .collect();
        Self { columns }
    }

    pub fn apply_row(&self, row: &mut [T]) {
        for (x, c) in row.iter_mut().zip(&self.columns) {
            if !c.constant {
                *x = (*x - c.mean) / c.std;
            }
        }
    }

    pub fn invert_row(&self, row: &mut [T]) {
        for (x, c) in row.iter_mut().zip(&self.columns) {
            if !c.constant {
                *x = *x * c.std + c.mean;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    FitApply,
    Apply,
    Inverse,
}

pub fn standardize<T: Real>(
    matrix: &Matrix<T>,
    params: Option<&ScalerParams<T>>,
    mode: ScaleMode,
) -> Result<(Matrix<T>, ScalerParams<T>), FeatureError> {
    let params = match (mode, params) {
        (ScaleMode::FitApply, _) => ScalerParams::fit(matrix),
        (_, Some(p)) => p.clone(),
        (_, None) => return Err(FeatureError::MissingScaler(mode)),
    };
    if params.columns.len() != matrix.ncols() {
        return Err(FeatureError::ColumnMismatch {
            expected: params.columns.len(),
            found: matrix.ncols(),
        });
    }
    let mut out = matrix.clone();
    for i in 0..out.nrows() {
        match mode {
            ScaleMode::Inverse => params.invert_row(out.row_mut(i)),
            _ => params.apply_row(out.row_mut(i)),
        }
    }
    Ok((out, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogDirection {
    Forward,
    Inverse,
}

/// `log(1 + v)` forward, `exp(u) - 1` inverse.
pub fn target_log_transform<T: Real>(values: &[T], direction: LogDirection) -> Result<Vec<T>, FeatureError> {
    match direction {
        LogDirection::Forward => values
            .iter()
            .map(|&v| {
                if v < -T::one() {
                    Err(FeatureError::LogDomain(v.to_f64_lossy()))
                } else {
                    Ok(v.ln_1p())
                }
            })
            .collect(),
        LogDirection::Inverse => Ok(values.iter().map(|&u| u.exp_m1()).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded uniform permutation partitioned by `ratios`. Train and validation
/// sizes are rounded, test takes the remainder, and every part keeps at
/// least one row.
pub fn split_dataset(n_rows: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices, FeatureError> {
    let r = [ratios.train, ratios.validation, ratios.test];
    if r.iter().any(|&x| !(x > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(FeatureError::InvalidRatios(r));
    }
    if n_rows < 3 {
        return Err(FeatureError::TooFewRows(n_rows));
    }
    let mut n_train = ((n_rows as f64 * ratios.train).round() as usize).clamp(1, n_rows - 2);
    let n_val = ((n_rows as f64 * ratios.validation).round() as usize).clamp(1, n_rows - n_train - 1);
    if n_train + n_val >= n_rows {
        n_train = n_rows - n_val - 1;
    }

    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        validation,
        test,
        seed,
    })
}

/// Raw model input before encoding and scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow<T> {
    pub time: T,
    pub vessel: VesselId,
    pub case: CaseId,
    pub heart_rate: T,
}

/// Everything needed to map raw rows to model inputs and model outputs
/// back to velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform<T> {
    pub vessel_map: EncodingMap,
    pub case_map: EncodingMap,
    pub scaler: ScalerParams<T>,
    pub log_target: bool,
}

impl<T: Real> FeatureTransform<T> {
    /// Encoded but unscaled feature rows.
    pub fn encode_raw(&self, rows: &[FeatureRow<T>]) -> Result<Matrix<T>, FeatureError> {
        let mut data = Vec::with_capacity(rows.len() * N_FEATURES);
        for r in rows {
            data.push(r.time);
            data.push(T::count(self.vessel_map.code(r.vessel.as_str())?));
            data.push(T::count(self.case_map.code(r.case.as_str())?));
            data.push(r.heart_rate);
        }
        Ok(Matrix::from_vec(rows.len(), N_FEATURES, data))
    }

    pub fn encode(&self, rows: &[FeatureRow<T>]) -> Result<Matrix<T>, FeatureError> {
        let raw = self.encode_raw(rows)?;
        let (scaled, _) = standardize(&raw, Some(&self.scaler), ScaleMode::Apply)?;
        if !scaled.is_finite() {
            return Err(FeatureError::NonFinite);
        }
        Ok(scaled)
    }

    pub fn forward_target(&self, velocities: &[T]) -> Result<Vec<T>, FeatureError> {
        if self.log_target {
            target_log_transform(velocities, LogDirection::Forward)
        } else {
            Ok(velocities.to_vec())
        }
    }

    /// Back to m/s, clamped at zero.
    pub fn inverse_target(&self, outputs: &[T]) -> Vec<T> {
        let v = if self.log_target {
            target_log_transform(outputs, LogDirection::Inverse).expect("inverse is total")
        } else {
            outputs.to_vec()
        };
        v.into_iter().map(|x| x.max(T::zero())).collect()
    }
}

/// Scaled inputs with log-space targets and the original velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
    pub velocity: Vec<T>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        let mut velocity = self.velocity.clone();
        velocity.extend_from_slice(&other.velocity);
        Self {
            x: self.x.vstack(&other.x),
            y,
            velocity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData<T> {
    pub train: FeatureMatrix<T>,
    pub validation: FeatureMatrix<T>,
    pub test: FeatureMatrix<T>,
    pub transform: FeatureTransform<T>,
}

/// Encoding maps over every category present in the dataset.
pub fn encoding_maps<T: Real>(dataset: &Dataset<T>) -> (EncodingMap, EncodingMap) {
    let vessels: Vec<&str> = dataset.rows.iter().map(|r| r.vessel.as_str()).collect();
    let cases: Vec<&str> = dataset.rows.iter().map(|r| r.case.as_str()).collect();
    (label_encode(&vessels, "vessel").1, label_encode(&cases, "case").1)
}

/// Builds per-split matrices. Without a supplied scaler, one is fitted on
/// the training rows only and reused for validation and test.
pub fn build_matrices<T: Real>(
    dataset: &Dataset<T>,
    split: &SplitIndices,
    maps: (&EncodingMap, &EncodingMap),
    scaler: Option<&ScalerParams<T>>,
) -> Result<PreparedData<T>, FeatureError> {
    let rows: Vec<FeatureRow<T>> = dataset
        .rows
        .iter()
        .map(|r| FeatureRow {
            time: r.time,
            vessel: r.vessel,
            case: r.case,
            heart_rate: r.heart_rate,
        })
        .collect();
    let velocities: Vec<T> = dataset.rows.iter().map(|r| r.velocity).collect();
    let mut transform = FeatureTransform {
        vessel_map: maps.0.clone(),
        case_map: maps.1.clone(),
        scaler: ScalerParams { columns: Vec::new() },
        log_target: true,
    };
    let raw = transform.encode_raw(&rows)?;
    for &index in split.train.iter().chain(&split.validation).chain(&split.test) {
        if index >= raw.nrows() {
            return Err(FeatureError::IndexOutOfRange {
                index,
                rows: raw.nrows(),
            });
        }
    }
    transform.scaler = match scaler {
        Some(s) => s.clone(),
        None => ScalerParams::fit(&raw.select_rows(&split.train)),
    };
    let targets = transform.forward_target(&velocities)?;

    let part = |indices: &[usize]| -> Result<FeatureMatrix<T>, FeatureError> {
        let (x, _) = standardize(&raw.select_rows(indices), Some(&transform.scaler), ScaleMode::Apply)?;
        if !x.is_finite() {
            return Err(FeatureError::NonFinite);
        }
        Ok(FeatureMatrix {
            x,
            y: indices.iter().map(|&i| targets[i]).collect(),
            velocity: indices.iter().map(|&i| velocities[i]).collect(),
        })
    };
    Ok(PreparedData {
        train: part(&split.train)?,
        validation: part(&split.validation)?,
        test: part(&split.test)?,
        transform,
    })
}
